use cesslgan_core::data::{make_ring, split_ssl, RingParams};
use cesslgan_core::gradcheck::{check, Objective};
use cesslgan_core::nn::{Architecture, DiscriminatorNet, GeneratorNet};
use cesslgan_core::sslgan::draw_eval_batches;
use cesslgan_core::RngStream;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

#[test]
fn every_loss_matches_central_differences() {
    let (_, pool) = make_ring(4, &RingParams { train_n: 400, test_n: 50, ..RingParams::default() }).unwrap();
    let data = split_ssl(pool, 2, 4).unwrap();
    let arch = Architecture::default();
    let mut rng = RngStream::new(99, 0);
    let mut worst = 0.0f64;
    let mut probes = 0;
    for trial in 0..5 {
        let g = GeneratorNet::new(&arch, &mut rng);
        let d = DiscriminatorNet::new(&arch, &mut rng);
        let batch = draw_eval_batches(&data, 1, 8, arch.latent_dim, &mut rng).unwrap().remove(0);
        for obj in Objective::ALL {
            let n = obj.param_count(&g, &d);
            let idx: Vec<usize> = (0..30).map(|_| rng.below(n)).collect();
            for p in check(obj, &g, &d, &batch, &idx, H).unwrap() {
                let e = p.relative_error(FLOOR);
                assert!(e < TOL, "trial {trial} {p:?} rel {e}");
                worst = worst.max(e);
                probes += 1;
            }
        }
    }
    assert!(probes >= 400);
    assert!(worst < TOL);
}
