use sle_spectrum::{parse_number, BigRational, Number};

/// Parses a parameter grid: `a:b:n` (n evenly spaced points, both ends
/// included), a comma-separated list, or a single value. Exact endpoints
/// give exact points.
pub fn parse_grid(text: &str) -> Result<Vec<Number>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => single
            .split(',')
            .map(|s| parse_number(s).map_err(|e| format!("{e} in grid {text:?}")))
            .collect(),
        [a, b, n] => {
            let a = parse_number(a).map_err(|e| format!("{e} in grid {text:?}"))?;
            let b = parse_number(b).map_err(|e| format!("{e} in grid {text:?}"))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| format!("bad point count in grid {text:?}"))?;
            linspace(&a, &b, n).ok_or_else(|| format!("grid {text:?} needs at least one point"))
        }
        _ => Err(format!("cannot parse grid {text:?}: expected a:b:n or a list")),
    }
}

fn linspace(a: &Number, b: &Number, n: usize) -> Option<Vec<Number>> {
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(vec![a.clone()]);
    }
    let last = (n - 1) as i64;
    let pts = match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => (0..n as i64)
            .map(|i| Number::Exact(x + (y - x) * BigRational::new(i.into(), last.into())))
            .collect(),
        _ => {
            let (x, y) = (a.to_f64(), b.to_f64());
            (0..n as i64)
                .map(|i| Number::Float(if i == last { y } else { x + (y - x) * i as f64 / last as f64 }))
                .collect()
        }
    };
    Some(pts)
}

/// Values of a grid that must be floats.
pub fn float_grid(text: &str) -> Result<Vec<f64>, String> {
    Ok(parse_grid(text)?.iter().map(Number::to_f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_ranges_stay_exact() {
        let g = parse_grid("0:1:5").unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[1], Number::Exact(BigRational::new(1.into(), 4.into())));
        assert_eq!(g[4], Number::Exact(BigRational::new(1.into(), 1.into())));
    }

    #[test]
    fn float_ranges_hit_the_endpoint() {
        let g = float_grid("0.1:0.7:7").unwrap();
        assert_eq!(g[6], 0.7);
        assert!((g[3] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!(float_grid("-2,1/2,3").unwrap(), vec![-2.0, 0.5, 3.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
