//! Replays the stored protocol exchanges byte for byte. Set
//! `CHRONOSCOPE_BLESS=1` to rewrite the transcripts after an intended change.

use std::path::PathBuf;

use chronoscope_core::adapter::{handle_line, ForecastRequest, MockKind, MockResponder, ScalingHint};
use chronoscope_core::data::Freq;

fn exchanges() -> Vec<(&'static str, MockResponder, ForecastRequest)> {
    let monthly: Vec<f64> = (0..24)
        .map(|i| 100.0 + 10.0 * ((i % 12) as f64 - 5.5).abs() + 0.125 * i as f64)
        .collect();
    let daily = vec![10.5, 11.25, 9.75, 12.0, 10.0, 10.75, 11.5, 9.5, 12.25, 10.25];
    vec![
        (
            "echo",
            MockResponder::new(MockKind::Echo, 0),
            ForecastRequest::new("golden-echo", Freq::Hourly, vec![1.0, 2.5, -3.25, 4.0], 3),
        ),
        (
            "seasonal",
            MockResponder::new(MockKind::Seasonal { period: None }, 0),
            ForecastRequest::new("golden-seasonal", Freq::Monthly, monthly, 6),
        ),
        (
            "noisy",
            MockResponder::new(MockKind::Noisy { period: Some(5) }, 42),
            ForecastRequest {
                scaling_hint: ScalingHint::Minmax,
                ..ForecastRequest::new("golden-noisy", Freq::BusinessDaily, daily, 5)
            },
        ),
    ]
}

fn path(name: &str, part: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.{part}.json"))
}

#[test]
fn golden_transcripts_replay_bit_exactly() {
    let bless = std::env::var_os("CHRONOSCOPE_BLESS").is_some();
    for (name, responder, req) in exchanges() {
        let request = format!("{}\n", req.to_line());
        let response = format!("{}\n", handle_line(&responder, &request));
        if bless {
            std::fs::write(path(name, "request"), &request).unwrap();
            std::fs::write(path(name, "response"), &response).unwrap();
            continue;
        }
        let stored_req = std::fs::read(path(name, "request")).unwrap();
        let stored_resp = std::fs::read(path(name, "response")).unwrap();
        assert_eq!(
            request.as_bytes(),
            stored_req.as_slice(),
            "{name}: request bytes differ"
        );
        let replayed = format!(
            "{}\n",
            handle_line(&responder, std::str::from_utf8(&stored_req).unwrap())
        );
        assert_eq!(
            replayed.as_bytes(),
            stored_resp.as_slice(),
            "{name}: response bytes differ"
        );
        assert!(!replayed.contains("error"), "{name}: {replayed}");
    }
}
