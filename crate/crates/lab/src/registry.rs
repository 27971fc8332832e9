//! The experiment registry, in alphabetical order.

use crate::error::{LabError, Result};
use crate::experiments as ex;
use crate::sim::{Ctx, ExperimentOutput};

/// Optional configuration fields an experiment may accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knob {
    Density,
    Construction,
    Phi,
    Lambda,
    U,
    Levels,
    XLevel,
}

impl Knob {
    pub fn key(&self) -> &'static str {
        match self {
            Knob::Density => "density",
            Knob::Construction => "construction",
            Knob::Phi => "phi",
            Knob::Lambda => "lambda",
            Knob::U => "u",
            Knob::Levels => "levels",
            Knob::XLevel => "x_level",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub n_paths: usize,
    pub step: f64,
    pub horizon: f64,
    /// Fractions of the horizon.
    pub checkpoints: &'static [f64],
    /// Whether `run-all` replaces `n_paths` and `step` by the suite's.
    pub scaled: bool,
}

const QUARTERS: &[f64] = &[0.25, 0.5, 0.75, 1.0];

const fn scaled(horizon: f64) -> Defaults {
    Defaults { n_paths: 100_000, step: 1e-3, horizon, checkpoints: QUARTERS, scaled: true }
}

const fn fixed(n_paths: usize, horizon: f64) -> Defaults {
    Defaults { n_paths, step: 1e-3, horizon, checkpoints: QUARTERS, scaled: false }
}

pub type RunFn = fn(&Ctx) -> Result<ExperimentOutput>;

pub struct Experiment {
    pub name: &'static str,
    /// The identity or result the experiment checks.
    pub anchor: &'static str,
    pub defaults: Defaults,
    pub knobs: &'static [Knob],
    pub run: RunFn,
}

use Knob::*;

pub static REGISTRY: &[Experiment] = &[
    Experiment {
        name: "a-infinity",
        anchor: "law of A_inf: P'(A_inf > x) = exp(-int_0^x dz/lambda)",
        defaults: scaled(8.0),
        knobs: &[Density, Construction, Lambda],
        run: ex::passage::a_infinity,
    },
    Experiment {
        name: "doob-maximal",
        anchor: "Doob maximal identity after the last zero",
        defaults: scaled(8.0),
        knobs: &[Density, Levels],
        run: ex::passage::doob_maximal,
    },
    Experiment {
        name: "ito",
        anchor: "Ito formula under Q",
        defaults: Defaults { step: 1e-3, ..fixed(100, 2.0) },
        knobs: &[Density],
        run: ex::calculus::ito,
    },
    Experiment {
        name: "levy-eq5",
        anchor: "Levy-type identity: Q(S - X <= phi(S) up to T_u) = Q(1) exp(-I(u))",
        defaults: scaled(8.0),
        knobs: &[Density, Phi, U],
        run: ex::passage::levy_eq5,
    },
    Experiment {
        name: "levy-eq6",
        anchor: "Levy-type identity on [T_x, T_u]: Q(1) exp(-int_x^u dz/phi)",
        defaults: scaled(8.0),
        knobs: &[Density, Phi, U, XLevel],
        run: ex::passage::levy_eq6,
    },
    Experiment {
        name: "membership",
        anchor: "class membership of the constructions and of their shifts",
        defaults: fixed(1_000, 2.0),
        knobs: &[],
        run: ex::classes::membership,
    },
    Experiment {
        name: "passage-eq2",
        anchor: "first passage up to tau_u given F_gbar, averaged: E'[M^u_gbar ^ 1]",
        defaults: scaled(8.0),
        knobs: &[Density, Construction, Phi, U],
        run: ex::passage::passage_eq2,
    },
    Experiment {
        name: "passage-eq3",
        anchor: "first passage after gbar: 1 - exp(-int_0^inf dz/phi)",
        defaults: scaled(8.0),
        knobs: &[Density, Construction, Phi],
        run: ex::passage::passage_eq3,
    },
    Experiment {
        name: "passage-eq4",
        anchor: "first passage up to tau_u: 1 - exp(-int_0^u dz/phi)",
        defaults: scaled(8.0),
        knobs: &[Density, Construction, Phi, U],
        run: ex::passage::passage_eq4,
    },
    Experiment {
        name: "passage-s32",
        anchor: "first passage up to tau_u for Sigma_s(H) with P = |Q|",
        defaults: scaled(8.0),
        knobs: &[Density, Phi, U],
        run: ex::passage::passage_s32,
    },
    Experiment {
        name: "products",
        anchor: "products of orthogonal class members",
        defaults: scaled(2.0),
        knobs: &[],
        run: ex::classes::products,
    },
    Experiment {
        name: "q-bracket",
        anchor: "Q-bracket: X^2 - [X]^Q is a Q-local martingale",
        defaults: scaled(2.0),
        knobs: &[],
        run: ex::algebra::q_bracket,
    },
    Experiment {
        name: "q-martingale",
        anchor: "(Q,P)-martingales and their shifts under P'",
        defaults: Defaults { checkpoints: &[0.0, 0.25, 0.5, 1.0], ..scaled(2.0) },
        knobs: &[],
        run: ex::characterization::q_martingale,
    },
    Experiment {
        name: "r1-ui-martingale",
        anchor: "class D and compactly supported f: uniformly integrable martingale",
        defaults: scaled(4.0),
        knobs: &[Density, Construction],
        run: ex::characterization::r1_ui_martingale,
    },
    Experiment {
        name: "rho-algebra",
        anchor: "balayage operator rho: linear, nonnegative, multiplicative",
        defaults: fixed(1_000, 2.0),
        knobs: &[],
        run: ex::algebra::rho_algebra,
    },
    Experiment {
        name: "scaled-f",
        anchor: "f(A)X stays in the class with increasing part F(A)",
        defaults: scaled(2.0),
        knobs: &[],
        run: ex::classes::scaled_f,
    },
    Experiment {
        name: "sigma-s-characterization",
        anchor: "martingale characterization of Sigma_s(H)",
        defaults: scaled(2.0),
        knobs: &[Density],
        run: ex::characterization::sigma_s_characterization,
    },
    Experiment {
        name: "t1-characterization",
        anchor: "martingale characterization of Sigma(H)",
        defaults: scaled(1.0),
        knobs: &[Density, Construction],
        run: ex::characterization::t1_characterization,
    },
    Experiment {
        name: "tanaka-abs",
        anchor: "Tanaka formula under Q for |X - a|",
        defaults: fixed(100, 2.0),
        knobs: &[Density],
        run: ex::calculus::tanaka_abs,
    },
    Experiment {
        name: "tanaka-minus",
        anchor: "Tanaka formula under Q for (X - a)^-",
        defaults: fixed(100, 2.0),
        knobs: &[Density],
        run: ex::calculus::tanaka_minus,
    },
    Experiment {
        name: "tanaka-plus",
        anchor: "Tanaka formula under Q for (X - a)^+",
        defaults: fixed(100, 2.0),
        knobs: &[Density],
        run: ex::calculus::tanaka_plus,
    },
    Experiment {
        name: "zero-set",
        anchor: "zero set of the density, last zero gbar and gamma_t",
        defaults: scaled(1.0),
        knobs: &[Density],
        run: ex::density::zero_set,
    },
];

pub fn lookup(name: &str) -> Result<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| {
        let suggestion = REGISTRY
            .iter()
            .map(|e| (strsim::levenshtein(name, e.name), e.name))
            .min()
            .filter(|(d, _)| *d <= name.len().max(3) / 2 + 2)
            .map(|(_, n)| n.to_string());
        LabError::UnknownExperiment { name: name.to_string(), suggestion }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_unique() {
        assert!(REGISTRY.windows(2).all(|w| w[0].name < w[1].name));
    }

    #[test]
    fn suggestion_for_typo() {
        match lookup("pasage-eq4") {
            Err(LabError::UnknownExperiment { suggestion, .. }) => {
                assert_eq!(suggestion.as_deref(), Some("passage-eq4"))
            }
            _ => panic!("expected unknown experiment"),
        }
        assert!(lookup("zero-set").is_ok());
    }
}
