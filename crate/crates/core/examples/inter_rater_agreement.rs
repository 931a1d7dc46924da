//! Krippendorff's alpha for a small annotation study: three raters judge
//! ten pairs as aligned (1) or not (0), and rate severity on a 1–5 scale.

use judge_bench::metrics::{krippendorff_alpha, AlphaMetric, AnnotationMatrix};

fn main() {
    let binary = AnnotationMatrix::new(vec![
        vec![Some(1), Some(1), Some(1)],
        vec![Some(0), Some(0), Some(0)],
        vec![Some(0), Some(0), Some(1)],
        vec![Some(1), Some(1), None],
        vec![Some(0), Some(0), Some(0)],
        vec![Some(1), Some(1), Some(1)],
        vec![Some(0), Some(1), Some(0)],
        vec![Some(0), Some(0), Some(0)],
        vec![Some(1), Some(1), Some(1)],
        vec![Some(0), None, Some(0)],
    ]);
    let severity = AnnotationMatrix::new(vec![
        vec![Some(1), Some(1), Some(2)],
        vec![Some(4), Some(5), Some(4)],
        vec![Some(3), Some(3), Some(3)],
        vec![Some(2), Some(1), None],
        vec![Some(5), Some(5), Some(4)],
        vec![Some(1), Some(1), Some(1)],
        vec![Some(3), Some(4), Some(2)],
        vec![Some(4), Some(4), Some(5)],
        vec![Some(1), Some(2), Some(1)],
        vec![Some(5), None, Some(5)],
    ]);
    let show = |name: &str, m: &AnnotationMatrix, metric| match krippendorff_alpha(m, metric) {
        Ok(a) => println!("{name:<22} {metric:?}: α = {a:.3}"),
        Err(e) => println!("{name:<22} {metric:?}: {e}"),
    };
    show("aligned yes/no", &binary, AlphaMetric::Nominal);
    show("aligned yes/no", &binary, AlphaMetric::Ordinal);
    show("severity 1-5", &severity, AlphaMetric::Nominal);
    show("severity 1-5", &severity, AlphaMetric::Ordinal);
}
