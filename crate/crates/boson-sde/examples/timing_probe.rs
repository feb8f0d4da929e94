use boson_sde::dnse::{build_dnse_spec, DnseParams};
use boson_sde::linalg::ModeVector;
use boson_sde::sde::{run_ensemble, SdeConfig};
use num_complex::Complex64 as C64;
use nalgebra::DVector;

fn main() {
    let p = DnseParams::new(2, 2, 3.75).unwrap();
    let spec = build_dnse_spec(&p).unwrap();
    let z0 = ModeVector::new(DVector::from_column_slice(&[C64::new(1.0,0.0), C64::new(0.0,0.0)])).unwrap();
    let cfg = SdeConfig { dt: 1e-3, t_final: 1.0, samples: 10_000, seed: 42, renormalize: true, snapshot_times: vec![1.0] };
    let start = std::time::Instant::now();
    let ens = run_ensemble(&z0, &spec, &cfg).unwrap();
    println!("10k samples x 1000 steps: {:.2?} ({} states)", start.elapsed(), ens.snapshots[0].len());
}
