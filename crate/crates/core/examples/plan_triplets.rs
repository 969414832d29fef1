//! Balanced (fraud type, tactic, theory) plan for a synthetic dataset.

use cyberlens::sampling::{plan_triplets, seeds_for_plan, TripletSpace};

fn main() {
    let plan = plan_triplets(1500, &TripletSpace::full(), 7);
    let twos = plan.entries.iter().filter(|e| e.count == 2).count();
    println!("{} triplets, {} get 2 samples, {} get 1", plan.entries.len(), twos, plan.entries.len() - twos);
    for (fraud_type, n) in plan.fraud_type_marginals() {
        println!("  {:<32} {n}", fraud_type.display_name());
    }

    // small design space, as used for quick mock runs
    let small = plan_triplets(40, &TripletSpace::reduced(2, 4, 5), 7);
    let seeds = seeds_for_plan(&small, 7);
    for seed in seeds.iter().take(3) {
        println!("{}", seed.token());
    }
}
