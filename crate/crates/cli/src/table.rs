//! Long-format result rows and their CSV encoding.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

pub const HEADER: [&str; 8] = ["experiment", "n", "gamma", "seed", "params", "metric", "value", "status"];

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Ok,
    Pass,
    Fail,
    Error(String),
}

impl Status {
    fn render(&self) -> String {
        match self {
            Self::Ok => "ok".into(),
            Self::Pass => "PASS".into(),
            Self::Fail => "FAIL".into(),
            Self::Error(msg) => format!("error: {msg}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub params: String,
    pub metric: String,
    /// `None` only on error rows.
    pub value: Option<f64>,
    pub status: Status,
}

impl ResultRow {
    pub fn new(experiment: &str, metric: impl Into<String>, value: f64) -> Self {
        let (value, status) = if value.is_finite() {
            (Some(value), Status::Ok)
        } else {
            (None, Status::Error(format!("non-finite value {value}")))
        };
        Self { experiment: experiment.into(), n: None, gamma: None, seed: None, params: String::new(), metric: metric.into(), value, status }
    }

    pub fn error(experiment: &str, metric: impl Into<String>, message: impl ToString) -> Self {
        Self {
            experiment: experiment.into(),
            n: None,
            gamma: None,
            seed: None,
            params: String::new(),
            metric: metric.into(),
            value: None,
            status: Status::Error(message.to_string()),
        }
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn params(mut self, params: impl Into<String>) -> Self {
        self.params = params.into();
        self
    }

    pub fn verdict(mut self, passed: bool) -> Self {
        if !matches!(self.status, Status::Error(_)) {
            self.status = if passed { Status::Pass } else { Status::Fail };
        }
        self
    }

    pub fn is_failure(&self) -> bool {
        matches!(self.status, Status::Fail)
    }

    pub fn is_error(&self) -> bool {
        matches!(self.status, Status::Error(_))
    }

    fn record(&self) -> [String; 8] {
        [
            self.experiment.clone(),
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            self.gamma.map(num).unwrap_or_default(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.params.clone(),
            self.metric.clone(),
            self.value.map(num).unwrap_or_default(),
            self.status.render(),
        ]
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmp_opt<T: PartialOrd>(a: &Option<T>, b: &Option<T>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
    }
}

/// Orders by `(n, γ, seed)`, then by the remaining columns so ties are stable across runs.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        cmp_opt(&a.n, &b.n)
            .then_with(|| cmp_opt(&a.gamma, &b.gamma))
            .then_with(|| cmp_opt(&a.seed, &b.seed))
            .then_with(|| a.experiment.cmp(&b.experiment))
            .then_with(|| a.params.cmp(&b.params))
            .then_with(|| a.metric.cmp(&b.metric))
    });
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("rows are UTF-8")
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file)).map_err(std::io::Error::other)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(to_csv_string(&[]), "experiment,n,gamma,seed,params,metric,value,status\n");
    }

    #[test]
    fn single_row_round_trips() {
        let row = ResultRow::new("spectrum", "entropy_upper", 0.1 + 0.2).n(4).gamma(-1.5).seed(7).params("p=0.25, q");
        let text = to_csv_string(&[row]);
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let rec = rd.records().next().unwrap().unwrap();
        assert_eq!(&rec[4], "p=0.25, q");
        assert_eq!(rec[6].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(rec[2].parse::<f64>().unwrap(), -1.5);
    }

    #[test]
    fn non_finite_values_become_error_rows() {
        let row = ResultRow::new("x", "m", f64::NAN);
        assert!(row.is_error());
        assert!(to_csv_string(&[row]).contains("error: non-finite"));
    }

    #[test]
    fn sorting_ignores_insertion_order() {
        let a = ResultRow::new("e", "b", 1.0).n(2).gamma(0.5).seed(1);
        let b = ResultRow::new("e", "a", 1.0).n(2).gamma(0.5).seed(1);
        let c = ResultRow::new("e", "a", 1.0).n(1).gamma(0.9).seed(3);
        let d = ResultRow::new("e", "a", 1.0).n(2);
        let mut x = vec![a.clone(), b.clone(), c.clone(), d.clone()];
        let mut y = vec![d, c, b, a];
        sort_rows(&mut x);
        sort_rows(&mut y);
        assert_eq!(x, y);
        assert_eq!(x[0].n, Some(1));
        assert_eq!(x[1].gamma, None);
        assert_eq!(x[2].metric, "a");
    }
}
