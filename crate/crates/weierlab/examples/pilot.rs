// Scratch pilot runs used to freeze empirical constants. Not part of the
// deliverable test suite.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use weierlab::clt::{clt_experiment, lil_trace, EmpiricalCdf};
use weierlab::dynamics::reduce_mod1;
use weierlab::ergodic::{
    invariant_density, lyapunov, mean_phi, variance_birkhoff_mc, variance_green_kubo,
};
use weierlab::presets;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "ulam" || which == "all" {
        println!("== nonlinear Ulam accuracy, m = 2^14");
        let sys = presets::nonlinear_system();
        let t0 = std::time::Instant::now();
        let rho = invariant_density(sys.map(), 1 << 14, 1e-12).unwrap();
        println!("density build: {:?}, residual {:e}", t0.elapsed(), rho.residual);
        let mp = mean_phi(&sys, &rho);
        println!("mean_phi(nonlinear) = {mp:e}");
        let lyap = lyapunov(sys.map(), &rho).unwrap();
        println!("L = {}, ell = {}", lyap.l, lyap.ell);

        // Birkhoff oracle for L with 1e8 iterates
        let t0 = std::time::Instant::now();
        let mut x = 0.123456789;
        for _ in 0..1000 {
            x = sys.map().step(x);
        }
        let n = 100_000_000u64;
        let mut s = 0.0;
        let mut hist = vec![0u64; 1 << 14];
        for _ in 0..n {
            s += sys.map().df(x).abs().ln();
            hist[(x * 16384.0) as usize & 16383] += 1;
            x = sys.map().step(x);
        }
        let l_birkhoff = s / n as f64;
        println!(
            "L_birkhoff(1e8) = {l_birkhoff}, |diff| = {:e}  ({:?})",
            (l_birkhoff - lyap.l).abs(),
            t0.elapsed()
        );
        let l1: f64 = hist
            .iter()
            .zip(&rho.weights)
            .map(|(&c, &w)| (c as f64 / n as f64 - w).abs())
            .sum();
        println!("L1(histogram, ulam) = {l1:e}");
    }

    if which == "gk" || which == "all" {
        for name in ["classic", "smooth", "nonlinear", "cubic"] {
            println!("== GK for {name}, m = 2^14");
            let (map, obs) = presets::by_name(name).unwrap();
            let sys = weierlab::weierstrass::SystemHandle::new(
                map,
                obs,
                Default::default(),
                0.5,
            )
            .unwrap();
            let rho = invariant_density(sys.map(), 1 << 14, 1e-12).unwrap();
            let t0 = std::time::Instant::now();
            let gk = variance_green_kubo(&sys, &rho, 64, 1e-10);
            println!(
                "sigma2 = {}, used lags = {}, converged = {} ({:?})",
                gk.sigma2,
                gk.terms_or_samples,
                gk.converged,
                t0.elapsed()
            );
            let show: Vec<String> = gk.diagnostics[..30.min(gk.diagnostics.len())]
                .iter()
                .map(|c| format!("{c:+.3e}"))
                .collect();
            println!("c_n: {}", show.join(" "));
            let t0 = std::time::Instant::now();
            let mc = variance_birkhoff_mc(&sys, &rho, 1000, 100_000, 1);
            println!(
                "mc sigma2 = {} +- {:e} ({:?})",
                mc.sigma2,
                mc.std_error.unwrap(),
                t0.elapsed()
            );
            println!(
                "|gk - mc| = {:e}, 2% of scale = {:e}",
                (gk.sigma2 - mc.sigma2).abs(),
                0.02 * gk.sigma2.max(mc.sigma2).max(gk.diagnostics[0])
            );
        }
    }

    if which == "scales" || which == "all" {
        for name in ["classic", "nonlinear", "smooth", "cubic"] {
            let (map, obs) = presets::by_name(name).unwrap();
            let sys =
                weierlab::weierstrass::SystemHandle::new(map, obs, Default::default(), 0.5)
                    .unwrap();
            println!("== residual_ratio per-scale maxima, {name} (1000 x per k)");
            let mut rr_max = Vec::new();
            for k in 6..=24u32 {
                let h = 2f64.powi(-(k as i32));
                let mut rng = ChaCha8Rng::seed_from_u64(1);
                rng.set_stream(u64::from(k));
                let mut mx = 0.0f64;
                for _ in 0..1000 {
                    let x: f64 = rng.gen();
                    mx = mx.max(sys.residual_ratio(x, h).abs());
                }
                rr_max.push(mx);
            }
            let hi = rr_max.iter().cloned().fold(0.0f64, f64::max);
            let lo = rr_max.iter().cloned().fold(f64::INFINITY, f64::min);
            println!(
                "maxima: {:?}",
                rr_max.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
            );
            println!("max/min = {}", hi / lo);

            println!("== zygmund per-scale maxima, {name} (1000 x per k)");
            let mut zy_max = Vec::new();
            for k in 4..=20u32 {
                let h = 2f64.powi(-(k as i32));
                let mut rng = ChaCha8Rng::seed_from_u64(2);
                rng.set_stream(u64::from(k));
                let mut mx = 0.0f64;
                for _ in 0..1000 {
                    let x: f64 = rng.gen();
                    mx = mx.max(sys.zygmund_ratio(x, h));
                }
                zy_max.push(mx);
            }
            println!(
                "maxima: {:?}",
                zy_max.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
            );
            println!(
                "first = {}, last = {}, last/first = {}",
                zy_max[0],
                zy_max[zy_max.len() - 1],
                zy_max[zy_max.len() - 1] / zy_max[0]
            );
        }
    }

    if which == "clt" || which == "all" {
        println!("== CLT, classic, n=1e5, seed=1");
        let sys = presets::classic_system();
        let rho = invariant_density(sys.map(), 1 << 14, 1e-12).unwrap();
        let gk = variance_green_kubo(&sys, &rho, 64, 1e-10);
        let lyap = lyapunov(sys.map(), &rho).unwrap();
        let t0 = std::time::Instant::now();
        let reports =
            clt_experiment(&sys, &rho, &gk, &lyap, &[8, 14, 20], 100_000, 1).unwrap();
        for r in &reports {
            println!(
                "k={}: ks_normal={:.5} ks_birkhoff={:.5} mean_y={:+.4} var_y={:.4}",
                r.k, r.ks_vs_normal, r.ks_vs_birkhoff, r.mean_y, r.var_y
            );
        }
        println!("({:?})", t0.elapsed());

        println!("== LIL, classic, 10 points, k in [4,30], seed=1");
        let sl = gk.sigma * lyap.ell;
        println!("sigma*ell = {sl}");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pos = 0;
        let mut neg = 0;
        for i in 0..10 {
            let x = rho.sample(&mut rng);
            let trace = lil_trace(&sys, &gk, x, 4, 30).unwrap();
            pos += trace.entries.iter().filter(|e| e.r > 0.0).count();
            neg += trace.entries.iter().filter(|e| e.r < 0.0).count();
            println!(
                "x[{i}] = {x:.6}: sup|R| = {:.4}, sup/sigma_ell = {:.4}",
                trace.sup_abs,
                trace.sup_abs / sl
            );
        }
        println!("signs: {pos} positive, {neg} negative");
    }

    if which == "ks" || which == "all" {
        println!("== KS of 1e6 uniform draws vs uniform CDF");
        let map = weierlab::dynamics::CircleMapSpec::linear(2, "d");
        let rho = invariant_density(&map, 1 << 10, 1e-12).unwrap();
        for seed in [1u64, 2, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<f64> = (0..1_000_000).map(|_| rho.sample(&mut rng)).collect();
            let cdf = EmpiricalCdf::new(draws);
            let ks = weierlab::clt::ks_statistic(&cdf, |x| reduce_mod1(x.clamp(0.0, 1.0)).max(x.min(1.0)));
            // uniform CDF on [0,1]
            let ks_u = weierlab::clt::ks_statistic(&cdf, |x: f64| x.clamp(0.0, 1.0));
            println!("seed {seed}: ks = {ks_u:.6} (raw {ks:.6})");
        }
    }

    if which == "smoothmc" || which == "all" {
        println!("== smooth preset MC at n=1000 (coboundary 1/n decay)");
        let sys = presets::smooth_system();
        let rho = invariant_density(sys.map(), 1 << 14, 1e-12).unwrap();
        for seed in [1u64, 2] {
            let mc = variance_birkhoff_mc(&sys, &rho, 1000, 100_000, seed);
            println!("seed {seed}: sigma2 = {:e} +- {:e}", mc.sigma2, mc.std_error.unwrap());
        }
    }
}
