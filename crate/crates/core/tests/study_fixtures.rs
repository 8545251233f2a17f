//! Human-study tables: agreement and correlation numbers recomputed from the
//! bundled responses.

use capcomp_core::metrics::{agreement_matrix, majority_preference, TRUTH};
use capcomp_core::study;

fn close(actual: f64, expected: f64, tol: f64) {
    assert!((actual - expected).abs() <= tol, "{actual} vs {expected} (tol {tol})");
}

#[test]
fn task1_truth_against_mean_rating() {
    let t = agreement_matrix(&study::task(1).unwrap()).unwrap();
    let s = t.rating_summary.unwrap();
    close(s.mae, 0.525, 1e-12);
    close(s.pearson, 0.931, 0.001);
    close(s.spearman, 0.908, 0.001);
    close(s.inter_rater_pearson.unwrap(), 0.6543, 1e-4);
}

#[test]
fn task1_rater_cells_over_untied_question_pairs() {
    let t = agreement_matrix(&study::task(1).unwrap()).unwrap();
    let r13 = t.cell("R1", "R3").unwrap();
    close(r13.p_o, 0.94, 0.005);
    close(r13.kappa, 0.87, 0.005);
    let avg = t.rater_pairs.unwrap();
    close(avg.p_o, 0.853, 0.001);
    close(avg.kappa, 0.686, 0.001);
    // Rater-vs-truth values as computed from the responses.
    let expected = [
        (0.917, 0.833),
        (0.857, 0.719),
        (0.811, 0.606),
        (0.806, 0.604),
        (0.935, 0.868),
        (0.857, 0.715),
        (0.857, 0.696),
        (0.95, 0.886),
    ];
    for (r, (p_o, kappa)) in expected.iter().enumerate() {
        let c = t.cell(&format!("R{}", r + 1), TRUTH).unwrap();
        close(c.p_o, *p_o, 0.001);
        close(c.kappa, *kappa, 0.001);
    }
    assert_eq!(t.cell("R8", TRUTH).unwrap().n, 20);
}

#[test]
fn task2_cross_image_agreement() {
    let m = study::task(2).unwrap();
    let t = agreement_matrix(&m).unwrap();
    let avg = t.rater_pairs.unwrap();
    close(avg.p_o, 0.95, 0.005);
    close(avg.kappa, 0.85, 0.01);
    let r13 = t.cell("R1", "R3").unwrap();
    close(r13.p_o, 0.80, 1e-12);
    close(r13.kappa, 0.41, 0.01);
    let maj = t.majority.unwrap();
    assert_eq!(maj.vs_truth.p_o, 1.0);
    assert_eq!(maj.vs_truth.kappa, 1.0);
    assert_eq!(majority_preference(&m).unwrap(), maj.labels);
}

#[test]
fn task3_same_image_agreement() {
    let t = agreement_matrix(&study::task(3).unwrap()).unwrap();
    let avg = t.rater_pairs.unwrap();
    close(avg.p_o, 0.90, 0.005);
    close(avg.kappa, 0.78, 0.01);
    let maj = t.majority.unwrap();
    assert_eq!((maj.vs_truth.p_o, maj.vs_truth.kappa), (1.0, 1.0));
}

#[test]
fn timing_means() {
    let means = study::timing().unwrap().task_means();
    close(means[0], 10.16, 0.01);
    close(means[1], 9.45, 0.01);
    close(means[2], 9.52, 0.01);
}
