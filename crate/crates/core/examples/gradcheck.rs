//! Checks the analytic gradient of the softmax -> combination -> L1 tail
//! against central differences on seeded random instances.

use depthbins::gradcheck::{check_instance, max_pixel_grad_sum, grad_combine_l1, random_instance, random_trials};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> depthbins::Result<()> {
    for step in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let r = random_trials(100, step, 0)?;
        println!("h = {step:e}: {}", r.to_json_line());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inst = random_instance(&mut rng);
    let grad = grad_combine_l1(&inst.logits, &inst.centers, &inst.gt)?;
    println!(
        "one instance: {} bins on {}x{}, max |sum_n grad| = {:e}",
        inst.logits.channels(),
        inst.logits.height(),
        inst.logits.width(),
        max_pixel_grad_sum(&grad, inst.logits.channels())
    );
    println!("{}", check_instance(&inst, 1e-4)?.to_json_line());
    Ok(())
}
