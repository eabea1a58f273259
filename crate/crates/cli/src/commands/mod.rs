pub mod analyze;
pub mod simulate;
pub mod spectrum;
pub mod stationary;
pub mod sweep;
pub mod train;

/// Settings shared by every command.
pub struct Ctx {
    pub seed: u64,
    pub format: crate::output::Format,
    pub quiet: bool,
}

impl Ctx {
    /// Progress note on stderr, silenced by `--quiet`.
    pub fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    pub fn warn(&self, msg: &str) {
        eprintln!("warning: {msg}");
    }
}

/// Optimizer names with `_2`, `_3`, … appended to repeats.
pub fn unique_labels<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: Vec<&str> = Vec::new();
    names
        .map(|n| {
            seen.push(n);
            match seen.iter().filter(|s| **s == n).count() {
                1 => n.to_string(),
                k => format!("{n}_{k}"),
            }
        })
        .collect()
}
