//! Per-label scores, hallucination rate, intervals and significance markers.

use cyberlens::metrics::{
    f1_interval, hallucination_reduction, label_metrics, macro_f1, micro_aggregate, significance_test,
    ConfusionCounts, UndefinedPolicy,
};

fn main() -> Result<(), cyberlens::metrics::MetricsError> {
    // two labels over 144 narratives
    let a = ConfusionCounts::new(60, 12, 50, 22);
    let b = ConfusionCounts::new(5, 14, 120, 5);
    for (name, c) in [("a", a), ("b", b)] {
        let m = label_metrics(&c)?;
        println!(
            "{name}: acc {:.3} P {:.3} R {:.3} F1 {:.3} halluc {:.3} PxR {:.3}",
            m.accuracy,
            m.precision.unwrap_or(f64::NAN),
            m.recall.unwrap_or(f64::NAN),
            m.f1.unwrap_or(f64::NAN),
            m.hallucination_rate.unwrap_or(f64::NAN),
            m.pr_product.unwrap_or(f64::NAN)
        );
    }
    let micro = micro_aggregate(&[a, b])?;
    let f1s = [label_metrics(&a)?.f1, label_metrics(&b)?.f1];
    println!("micro F1 {:.3}, macro F1 {:.3}", micro.f1.unwrap_or(0.0), macro_f1(&f1s, UndefinedPolicy::Exclude)?);

    let ci = f1_interval(0.64, 144)?;
    println!("F1 0.64 over 144: se {:.4}, 95% CI [{:.3}, {:.3}]", ci.se, ci.lo, ci.hi);
    println!("hallucination 0.36 -> 0.14 is a {:.1}% reduction", hallucination_reduction(0.36, 0.14)?);
    for (base, ft) in [(0.65, 0.56), (0.12, 0.83), (0.62, 0.86)] {
        let t = significance_test(base, ft, 144)?;
        println!("{base:.2} -> {ft:.2}: z {:.2}, p {:.4} {}", t.z, t.p, t.marker.as_str());
    }
    Ok(())
}
