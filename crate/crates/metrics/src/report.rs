use std::fmt::Write as _;

/// EER of one system on one evaluation list.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub system: String,
    pub eer: f64,
    pub threshold: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
}

/// Fixed-width table with one row per system and EER in percent.
pub fn render_table(rows: &[EvalSummary]) -> String {
    let w = rows.iter().map(|r| r.system.len()).max().unwrap_or(0).max(6);
    let mut s = String::new();
    writeln!(s, "{:<w$}  {:>8}  {:>10}  {:>8}  {:>6}", "system", "EER(%)", "threshold", "bonafide", "spoof").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<w$}  {:>8.2}  {:>10.6}  {:>8}  {:>6}",
            r.system,
            100.0 * r.eer,
            r.threshold,
            r.n_bonafide,
            r.n_spoof
        )
        .unwrap();
    }
    s
}

/// `key=value` lines: the resolved configuration first, then one block of
/// metrics per system keyed by its name.
pub fn render_kv(rows: &[EvalSummary], config: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in config {
        writeln!(s, "config.{k}={v}").unwrap();
    }
    for r in rows {
        let p = &r.system;
        writeln!(s, "{p}.eer={:.6}", r.eer).unwrap();
        writeln!(s, "{p}.eer_percent={:.2}", 100.0 * r.eer).unwrap();
        writeln!(s, "{p}.threshold={:.6}", r.threshold).unwrap();
        writeln!(s, "{p}.n_bonafide={}", r.n_bonafide).unwrap();
        writeln!(s, "{p}.n_spoof={}", r.n_spoof).unwrap();
    }
    s
}
