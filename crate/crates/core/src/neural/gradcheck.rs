/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Coordinate with the largest error, with its analytic and numeric values.
    pub worst: Option<(usize, f64, f64)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

/// Errors are `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps roundoff on
/// vanishing gradients from dominating the report.
const DENOMINATOR_FLOOR: f64 = 1e-6;

/// Compares `analytic[c]` against `(f(p + h e_c) - f(p - h e_c)) / 2h` for
/// every coordinate in `coords`.
pub fn check_gradients<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient shape must mirror parameters");
    let mut p = params.to_vec();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: None,
        tolerance,
    };
    for &c in coords {
        let orig = p[c];
        p[c] = orig + h;
        let plus = loss(&p);
        p[c] = orig - h;
        let minus = loss(&p);
        p[c] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[c];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((c, a, numeric));
        }
    }
    report
}
