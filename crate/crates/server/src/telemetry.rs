use std::collections::BTreeMap;
use std::sync::Mutex;

/// Request counters keyed by route. Disabled unless configured; when
/// disabled, recording is a no-op and nothing is reported.
#[derive(Debug, Default)]
pub struct Telemetry {
    counts: Option<Mutex<BTreeMap<String, u64>>>,
}

impl Telemetry {
    pub fn new(enabled: bool) -> Self {
        Self {
            counts: enabled.then(Mutex::default),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.counts.is_some()
    }

    pub fn record(&self, route: &str) {
        if let Some(counts) = &self.counts {
            *counts.lock().unwrap_or_else(|p| p.into_inner()).entry(route.to_string()).or_default() += 1;
        }
    }

    pub fn snapshot(&self) -> Option<BTreeMap<String, u64>> {
        self.counts.as_ref().map(|c| c.lock().unwrap_or_else(|p| p.into_inner()).clone())
    }
}
