use collapse_web::{bernoulli_survival, gaussian_collapse, mixture_collapse, mixture_fit};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("export succeeds")).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn survival_view_is_consistent() {
    let v = parse(bernoulli_survival(0.05, 10, 20, 5_000, 1));
    let (lo, hi, emp) = (floats(&v["lower"]), floats(&v["upper"]), floats(&v["empirical"]));
    let hw = floats(&v["half_width"]);
    assert_eq!(lo.len(), 20);
    for i in 0..20 {
        assert!(lo[i] <= hi[i]);
        assert!(emp[i] + hw[i] + 0.02 >= lo[i] && emp[i] - hw[i] - 0.02 <= hi[i], "k={}", i + 1);
    }
    assert!(v["tight_upper"][0].is_f64());
}

#[test]
fn same_seed_same_json() {
    assert_eq!(gaussian_collapse(1.0, 0.1, 10, 50, 500, 4), gaussian_collapse(1.0, 0.1, 10, 50, 500, 4));
}

#[test]
fn gaussian_view_has_both_bounds() {
    let v = parse(gaussian_collapse(1.0, 0.1, 10, 100, 2_000, 2));
    let (closed, opt) = (floats(&v["closed_form"]), floats(&v["optimized"]));
    assert_eq!(closed.len(), 101);
    assert!(closed.iter().zip(&opt).all(|(c, o)| o <= c));
    let m = parse(mixture_collapse(1.0, 1.0, 0.1, 10, 30, 200, 2));
    assert!(m["optimized"].is_null());
}

#[test]
fn mixture_fit_lands_on_the_circle() {
    let v = parse(mixture_fit(2.0, 0.5, 40, 9));
    let xs = floats(&v["samples"]);
    let s2 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    for key in ["joint", "approx"] {
        let (mu, sigma) = (v[key]["mu"].as_f64().unwrap(), v[key]["sigma"].as_f64().unwrap());
        assert!((mu * mu + sigma * sigma - s2).abs() < 1e-9 * s2);
    }
}

#[test]
fn bad_input_is_an_error_message() {
    assert!(bernoulli_survival(1.5, 10, 5, 10, 0).is_err());
    assert!(bernoulli_survival(0.5, 10, 100_000, 100_000, 0).is_err());
    assert!(mixture_fit(1.0, 1.0, 3, 0).is_err());
}
