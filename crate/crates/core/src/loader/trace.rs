//! Load event trace and its one-line-per-event text form:
//! `<timestamp_us> <worker_id> <KIND> <module>`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Load,
    SkipHw,
    SkipFlag,
    DupAttempt,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Load => "LOAD",
            EventKind::SkipHw => "SKIP_HW",
            EventKind::SkipFlag => "SKIP_FLAG",
            EventKind::DupAttempt => "DUP_ATTEMPT",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LOAD" => Ok(EventKind::Load),
            "SKIP_HW" => Ok(EventKind::SkipHw),
            "SKIP_FLAG" => Ok(EventKind::SkipFlag),
            "DUP_ATTEMPT" => Ok(EventKind::DupAttempt),
            other => Err(format!("unknown event kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadEvent {
    /// Microseconds since the session clock started. LOAD events are stamped
    /// when the load completes.
    pub timestamp_us: u64,
    pub worker: usize,
    pub kind: EventKind,
    pub module: String,
}

impl fmt::Display for LoadEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.timestamp_us, self.worker, self.kind, self.module)
    }
}

/// Events of one session in global completion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<LoadEvent>,
}

impl Trace {
    pub fn new(events: Vec<LoadEvent>) -> Self {
        Trace { events }
    }

    pub fn events(&self) -> &[LoadEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &LoadEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Module names of LOAD events, in trace order.
    pub fn loads(&self) -> Vec<&str> {
        self.of_kind(EventKind::Load).map(|e| e.module.as_str()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 24);
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn parse_trace(text: &str) -> Result<Trace, String> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| format!("trace line {}: {what}", i + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [ts, worker, kind, module] = fields[..] else {
            return Err(bad("expected `<timestamp_us> <worker_id> <KIND> <module>`"));
        };
        events.push(LoadEvent {
            timestamp_us: ts.parse().map_err(|_| bad("bad timestamp"))?,
            worker: worker.parse().map_err(|_| bad("bad worker id"))?,
            kind: kind.parse().map_err(|e: String| bad(&e))?,
            module: module.to_string(),
        });
    }
    Ok(Trace { events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_format() {
        let e = LoadEvent { timestamp_us: 120, worker: 3, kind: EventKind::DupAttempt, module: "if_em".into() };
        assert_eq!(e.to_string(), "120 3 DUP_ATTEMPT if_em");
        assert_eq!(parse_trace("120 3 DUP_ATTEMPT if_em\n").unwrap().events(), [e]);
        assert!(parse_trace("1 2 LOAD").is_err());
        assert!(parse_trace("x 2 LOAD a").is_err());
        assert!(parse_trace("1 2 LOADED a").is_err());
        assert!(parse_trace("").unwrap().is_empty());
    }

    fn event() -> impl Strategy<Value = LoadEvent> {
        (
            any::<u64>(),
            0usize..64,
            prop::sample::select(vec![EventKind::Load, EventKind::SkipHw, EventKind::SkipFlag, EventKind::DupAttempt]),
            "[a-z_][a-z0-9_.]{0,8}",
        )
            .prop_map(|(timestamp_us, worker, kind, module)| LoadEvent { timestamp_us, worker, kind, module })
    }

    proptest! {
        #[test]
        fn text_round_trip(events in prop::collection::vec(event(), 0..20)) {
            let t = Trace::new(events);
            prop_assert_eq!(parse_trace(&t.to_text()).unwrap(), t);
        }
    }
}
