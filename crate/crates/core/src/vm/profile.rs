use std::fmt::Write;
use std::time::Instant;

pub const PROFILE_HEADER: &str = "** Calls *** Time **** Name";
pub const ALL_PROGRAM: &str = "All Program";

/// Per-function call counts and self time for one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileData {
    pub names: Vec<String>,
    pub calls: Vec<u64>,
    /// Time in the function excluding its callees.
    pub self_secs: Vec<f64>,
    pub total_secs: f64,
}

impl ProfileData {
    /// Functions other than the entry, hottest first, then the program
    /// total. Functions that were never entered (for example because every
    /// call was inlined) are listed with zero calls.
    pub fn report(&self) -> String {
        let mut rows: Vec<usize> = (1..self.names.len()).collect();
        rows.sort_by(|&a, &b| {
            self.self_secs[b]
                .total_cmp(&self.self_secs[a])
                .then(self.calls[b].cmp(&self.calls[a]))
                .then(a.cmp(&b))
        });
        let mut s = String::from(PROFILE_HEADER);
        s.push('\n');
        for f in rows {
            let _ = writeln!(
                s,
                "{:>8} {:>11.2}  --  {}",
                self.calls[f], self.self_secs[f], self.names[f]
            );
        }
        let _ = writeln!(s, "{:>8} {:>11.2}  --  {ALL_PROGRAM}", "", self.total_secs);
        s
    }
}

/// Shadow stack of active calls used to split elapsed time into self time.
pub(crate) struct Profiler {
    data: ProfileData,
    start: Instant,
    /// (function, entry time, time spent in callees)
    active: Vec<(usize, Instant, f64)>,
}

impl Profiler {
    pub fn new(names: Vec<String>) -> Self {
        let n = names.len();
        Profiler {
            data: ProfileData {
                names,
                calls: vec![0; n],
                self_secs: vec![0.0; n],
                total_secs: 0.0,
            },
            start: Instant::now(),
            active: Vec::new(),
        }
    }

    pub fn enter(&mut self, f: usize) {
        self.data.calls[f] += 1;
        self.active.push((f, Instant::now(), 0.0));
    }

    pub fn leave(&mut self) {
        if let Some((f, t0, child)) = self.active.pop() {
            let elapsed = t0.elapsed().as_secs_f64();
            self.data.self_secs[f] += (elapsed - child).max(0.0);
            if let Some(parent) = self.active.last_mut() {
                parent.2 += elapsed;
            }
        }
    }

    pub fn finish(mut self) -> ProfileData {
        while !self.active.is_empty() {
            self.leave();
        }
        self.data.total_secs = self.start.elapsed().as_secs_f64();
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let p = ProfileData {
            names: vec!["main".into(), "ctz".into(), "search1".into()],
            calls: vec![1, 0, 761087],
            self_secs: vec![0.01, 0.0, 0.43],
            total_secs: 0.51,
        };
        let r = p.report();
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines[0], "** Calls *** Time **** Name");
        assert_eq!(lines[1], "  761087        0.43  --  search1");
        assert_eq!(lines[2], "       0        0.00  --  ctz");
        assert_eq!(lines[3], "                0.51  --  All Program");
    }

    #[test]
    fn no_functions_only_total() {
        let p = ProfileData {
            names: vec!["main".into()],
            calls: vec![1],
            self_secs: vec![0.0],
            total_secs: 0.0,
        };
        assert_eq!(p.report().lines().count(), 2);
    }
}
