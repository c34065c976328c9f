use crate::model::{Dims, FactoredCamdp};

/// Name under which the bundled case-study model is registered.
pub const CASE_STUDY_NAME: &str = "paper-case-study";

/// The bundled 8-state case-study model: two states per factor, two actions
/// per agent, matrices fixed to 8 decimal digits.
pub fn paper_case_study() -> FactoredCamdp {
    let dims = Dims {
        ns0: 2,
        nss: 2,
        ns1: 2,
        na0: 2,
        na1: 2,
    };
    let p0 = vec![
        vec![vec![0.72896067, 0.27103933], vec![0.95167994, 0.04832006]],
        vec![vec![0.15320242, 0.84679758], vec![0.55851098, 0.44148902]],
    ];
    let ps = vec![
        vec![
            vec![vec![0.66489771, 0.33510229], vec![0.51544335, 0.48455665]],
            vec![vec![0.07046136, 0.92953864], vec![0.52137167, 0.47862833]],
        ],
        vec![
            vec![vec![0.56727427, 0.43272573], vec![0.11531405, 0.88468595]],
            vec![vec![0.65019582, 0.34980418], vec![0.41909603, 0.58090397]],
        ],
    ];
    let p1 = vec![
        vec![vec![0.35013916, 0.64986084], vec![0.37319646, 0.62680354]],
        vec![vec![0.47227529, 0.52772471], vec![0.39457278, 0.60542722]],
    ];
    let r0 = vec![
        vec![vec![0.25561406, 0.67130943], vec![0.59900591, 0.71733215]],
        vec![vec![0.93734953, 0.35180977], vec![0.25363410, 0.40247251]],
    ];
    let rs = vec![
        vec![
            vec![vec![0.39837292, 0.77088097], vec![0.76475098, 0.28385938]],
            vec![vec![0.18954219, 0.47125096], vec![0.33480604, 0.73473504]],
        ],
        vec![
            vec![vec![0.18910712, 0.33110407], vec![0.84422842, 0.61502403]],
            vec![vec![0.88526408, 0.97655302], vec![0.83690859, 0.18082463]],
        ],
    ];
    let r1 = vec![
        vec![vec![0.74651072, 0.72407057], vec![0.40610780, 0.98937985]],
        vec![vec![0.45049928, 0.37380843], vec![0.70962861, 0.08245855]],
    ];
    FactoredCamdp::new(dims, p0, ps, p1, r0, rs, r1).expect("built-in model is well-formed")
}

/// Looks up a built-in model by its registered name.
pub fn by_name(name: &str) -> Option<FactoredCamdp> {
    match name {
        CASE_STUDY_NAME => Some(paper_case_study()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_shape() {
        let m = paper_case_study();
        assert_eq!(m.n_states(), 8);
        assert_eq!(m.enumerate_pi0().len(), 16);
        assert_eq!(m.enumerate_pi1().len(), 16);
    }

    #[test]
    fn lookup() {
        assert!(by_name(CASE_STUDY_NAME).is_some());
        assert!(by_name("nonexistent").is_none());
    }
}
