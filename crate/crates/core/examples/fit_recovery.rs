//! Parameter recovery of every primitive kind on clean and noisy samples.
//!
//! Usage: `fit_recovery [n] [sigma]`

use vorofit::fitting::{fit_curve, fit_surface, parameter_error, AnyPrimitive};
use vorofit::scenes::primitive_fixtures;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let sigma: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.002);
    for (i, clean) in primitive_fixtures(n).into_iter().enumerate() {
        for (label, fx) in [
            ("clean", clean.clone()),
            ("noisy", clean.with_noise(sigma, i as u64)),
        ] {
            let fit = match &fx.truth {
                AnyPrimitive::Surface(s) => fit_surface(&fx.points, s.kind()),
                AnyPrimitive::Curve(c) => fit_curve(&fx.points, c.kind()),
            };
            match fit {
                Ok(f) => println!(
                    "{:>8} {label}: parameter error {:.2e}, rms {:.2e}",
                    kind_name(&fx.truth),
                    parameter_error(&f.primitive, &fx.truth).unwrap_or(f64::INFINITY),
                    f.rms_error
                ),
                Err(e) => println!("{:>8} {label}: {e}", kind_name(&fx.truth)),
            }
        }
    }
}

fn kind_name(p: &AnyPrimitive) -> String {
    match p {
        AnyPrimitive::Surface(s) => format!("{:?}", s.kind()),
        AnyPrimitive::Curve(c) => format!("{:?}", c.kind()),
    }
}
