use super::estep::Posteriors;
use crate::math::argmax;

/// Modal assignments `(level-1 per individual, level-2 per site)`, zero-based.
/// Ties go to the lowest class index.
pub fn classify(post: &Posteriors) -> (Vec<usize>, Vec<usize>) {
    let level1 = post.marginal_rows().into_iter().map(argmax).collect();
    let level2 = post.site_rows().into_iter().map(argmax).collect();
    (level1, level2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(c_marg: Vec<f64>, w_post: Vec<f64>, l: usize, m: usize) -> Posteriors {
        let n = c_marg.len() / l;
        Posteriors {
            level1_classes: l,
            level2_classes: m,
            w_post,
            c_cond: vec![0.0; n * m * l],
            c_marg,
        }
    }

    #[test]
    fn degenerate_rows() {
        let p = post(vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0], vec![0.0, 1.0], 3, 2);
        assert_eq!(classify(&p), (vec![1, 0], vec![1]));
    }

    #[test]
    fn ties_go_to_first_class() {
        let p = post(vec![0.5, 0.5], vec![0.5, 0.5], 2, 2);
        assert_eq!(classify(&p), (vec![0], vec![0]));
    }

    #[test]
    fn monotone_rescaling_keeps_assignment() {
        let scores = [0.2f64, 0.5, 0.3];
        let p = post(scores.to_vec(), vec![1.0], 3, 1);
        let rescaled: Vec<f64> = scores.iter().map(|v| (3.0 * v).exp() + 1.0).collect();
        let q = post(rescaled, vec![1.0], 3, 1);
        assert_eq!(classify(&p), classify(&q));
    }
}
