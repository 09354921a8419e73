//! Density specs, CSV readers and number formatting.

use std::path::Path;

use gsd_core::{Binomial, DiscreteDensity, Geometric, ParametricModel, Poisson, DEFAULT_TAIL};

pub type BoxedModel = Box<dyn ParametricModel + Send + Sync>;

/// `poisson`, `geometric` or `binomial:<m>`.
pub fn model_from_id(id: &str) -> Result<BoxedModel, String> {
    let mut parts = id.trim().split(':');
    let name = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    match (name, rest.as_slice()) {
        ("poisson", []) => Ok(Box::new(Poisson)),
        ("geometric", []) => Ok(Box::new(Geometric)),
        ("binomial", [m]) => {
            let m = m.parse::<u64>().map_err(|_| format!("bad binomial size `{m}`"))?;
            Ok(Box::new(Binomial::new(m).map_err(|e| e.to_string())?))
        }
        _ => Err(format!("unknown model `{id}` (expected poisson, geometric or binomial:<m>)")),
    }
}

/// A density given as `family:params` (`poisson:5`, `geometric:0.3`,
/// `binomial:10:0.4`) or as a path to an `x,mass` CSV file.
pub fn parse_density(spec: &str) -> Result<DiscreteDensity, String> {
    if Path::new(spec).is_file() {
        return read_masses(Path::new(spec));
    }
    let (name, params) = spec
        .split_once(':')
        .ok_or_else(|| format!("`{spec}` is neither a file nor a family:params spec"))?;
    let nums: Vec<f64> = params
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number `{s}` in `{spec}`")))
        .collect::<Result<_, _>>()?;
    let (model, theta): (BoxedModel, Vec<f64>) = match (name, nums.as_slice()) {
        ("poisson", [t]) => (Box::new(Poisson), vec![*t]),
        ("geometric", [p]) => (Box::new(Geometric), vec![*p]),
        ("binomial", [m, p]) if m.fract() == 0.0 && *m >= 0.0 => {
            (Box::new(Binomial::new(*m as u64).map_err(|e| e.to_string())?), vec![*p])
        },
        _ => return Err(format!("unknown density spec `{spec}`")),
    };
    model.density(&theta, DEFAULT_TAIL).map_err(|e| e.to_string())
}

/// Reads an `x,mass` file (header required). Masses summing to within
/// `[0.999, 1.001]` are renormalized; anything else is rejected.
pub fn read_masses(path: &Path) -> Result<DiscreteDensity, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols != ["x", "mass"] {
        return Err(format!("{}: header must be `x,mass`", path.display()));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = || format!("{}: bad row {}", path.display(), line + 2);
        let x: i64 = rec.get(0).ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let m: f64 = rec.get(1).ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        if !(m >= 0.0 && m.is_finite()) {
            return Err(format!("{}: negative or non-finite mass at x = {x}", path.display()));
        }
        rows.push((x, m));
    }
    if rows.is_empty() {
        return Err(format!("{}: no rows", path.display()));
    }
    let lo = rows.iter().map(|r| r.0).min().unwrap();
    let hi = rows.iter().map(|r| r.0).max().unwrap();
    let mut masses = vec![0.0; (hi - lo + 1) as usize];
    for (x, m) in rows {
        masses[(x - lo) as usize] += m;
    }
    let total: f64 = masses.iter().sum();
    if !(0.999..=1.001).contains(&total) {
        return Err(format!("{}: masses sum to {total}, outside [0.999, 1.001]", path.display()));
    }
    masses.iter_mut().for_each(|m| *m /= total);
    DiscreteDensity::unnormalized(lo, masses).map_err(|e| e.to_string())
}

/// Integer observations, one per line; blank lines and a non-numeric first
/// line (header) are ignored.
pub fn read_data(path: &Path) -> Result<Vec<i64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim().trim_end_matches(',');
        if t.is_empty() {
            continue;
        }
        match t.parse::<i64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(format!("{}: line {} is not an integer: `{t}`", path.display(), i + 1)),
        }
    }
    if out.is_empty() {
        return Err(format!("{}: no observations", path.display()));
    }
    Ok(out)
}

/// Twelve significant digits; scientific below `1e-4` in magnitude.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.000000000000".into();
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if exp < -4 {
        sci
    } else {
        format!("{:.*}", (11 - exp).max(0) as usize, v)
    }
}

/// Tuning parameters and grid coordinates, shortest round-trip form.
pub fn fmt_param(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_value(0.0), "0.000000000000");
        assert_eq!(fmt_value(-0.0), "0.000000000000");
        assert_eq!(fmt_value(0.5), "0.500000000000");
        assert_eq!(fmt_value(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_value(123.456), "123.456000000");
        assert_eq!(fmt_value(-2.5e-5), "-2.50000000000e-5");
        assert_eq!(fmt_value(1e-4), "0.000100000000000");
        assert_eq!(fmt_value(f64::NAN), "NaN");
    }

    #[test]
    fn specs() {
        assert!(parse_density("poison:5").is_err());
        assert!(parse_density("poisson:-1").is_err());
        let d = parse_density("poisson:5").unwrap();
        assert!((d.mean() - 5.0).abs() < 1e-9);
        assert!(model_from_id("binomial:10").is_ok());
        assert!(model_from_id("normal").is_err());
    }
}
