//! Instance families and seeded random instances.

use rand::Rng;

use crate::budget::Budget;
use crate::csp::{all_tuples, Assignment, Constraint, CspInstance, Symbol};
use crate::error::{Error, Result};
use crate::reconfig::{exact_path, ReconfigPath, ReconfigProblem};

fn check_chain_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Precondition(format!("chain needs at least 2 variables, got {n}")));
    }
    Ok(())
}

/// `x_i = x_{i+1}` for consecutive variables, from all zeros to all ones.
/// Every path must break some equality, so the reconfiguration value is
/// below 1.
pub fn equality_chain(n: usize) -> Result<ReconfigProblem> {
    check_chain_len(n)?;
    let cons = (0..n - 1)
        .map(|i| Constraint::from_fn(vec![i, i + 1], 2, |t| t[0] == t[1]))
        .collect();
    let inst = CspInstance::new(n, 2, cons)?;
    ReconfigProblem::new(inst, vec![0; n].into(), vec![1; n].into())
}

/// `x_i or x_{i+1}` for consecutive variables, from `1010...` to all ones.
pub fn or_chain(n: usize) -> Result<ReconfigProblem> {
    check_chain_len(n)?;
    let cons = (0..n - 1)
        .map(|i| Constraint::from_fn(vec![i, i + 1], 2, |t| t[0] == 1 || t[1] == 1))
        .collect();
    let inst = CspInstance::new(n, 2, cons)?;
    let ini: Vec<Symbol> = (0..n).map(|i| (i % 2 == 0) as Symbol).collect();
    ReconfigProblem::new(inst, ini.into(), vec![1; n].into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomCspParams {
    pub num_vars: usize,
    pub alphabet_size: Symbol,
    pub num_constraints: usize,
    /// Upper bound on constraint arity; each constraint draws from
    /// `1..=max_arity.min(num_vars)`.
    pub max_arity: usize,
    /// Probability that a tuple is accepted, on top of the planted ones.
    pub density: f64,
}

impl RandomCspParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_vars == 0 || self.alphabet_size == 0 || self.num_constraints == 0 || self.max_arity == 0 {
            return Err(Error::Precondition(
                "num_vars, alphabet, constraints and arity must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::Precondition(format!("density {} not in [0, 1]", self.density)));
        }
        Ok(())
    }
}

fn random_assignment<R: Rng>(rng: &mut R, n: usize, a: Symbol) -> Assignment {
    Assignment::new((0..n).map(|_| rng.gen_range(0..a)).collect())
}

/// Random instance over `params` whose random endpoints are planted as
/// solutions: every constraint accepts their projections.
pub fn random_csp<R: Rng>(rng: &mut R, params: &RandomCspParams) -> Result<ReconfigProblem> {
    params.validate()?;
    let n = params.num_vars;
    let a = params.alphabet_size;
    let ini = random_assignment(rng, n, a);
    let tar = random_assignment(rng, n, a);
    let cons = (0..params.num_constraints)
        .map(|_| {
            let arity = rng.gen_range(1..=params.max_arity.min(n));
            let vars = rand::seq::index::sample(rng, n, arity).into_vec();
            let planted = |p: &Assignment, t: &[Symbol]| vars.iter().zip(t).all(|(&v, &s)| p.get(v) == s);
            let acc: Vec<Vec<Symbol>> = all_tuples(arity, a)
                .filter(|t| planted(&ini, t) || planted(&tar, t) || rng.gen_bool(params.density))
                .collect();
            Constraint::table(vars, acc)
        })
        .collect();
    let inst = CspInstance::new(n, a, cons)?;
    ReconfigProblem::new(inst, ini, tar)
}

/// Like [`random_csp`] but, half of the time, with arbitrary endpoints that
/// need not be solutions.
pub fn random_problem<R: Rng>(rng: &mut R, params: &RandomCspParams) -> Result<ReconfigProblem> {
    let p = random_csp(rng, params)?;
    if rng.gen_bool(0.5) {
        return Ok(p);
    }
    let ini = random_assignment(rng, params.num_vars, params.alphabet_size);
    let tar = random_assignment(rng, params.num_vars, params.alphabet_size);
    ReconfigProblem::new_or_relaxed(p.instance().clone(), ini, tar)
}

/// Random binary 2-CSP on `n` variables with distinct endpoints joined by an
/// exact path, together with one such path.
pub fn random_yes_source<R: Rng>(rng: &mut R, n: usize) -> Result<(ReconfigProblem, ReconfigPath)> {
    if n < 2 {
        return Err(Error::Precondition("source needs at least 2 variables".into()));
    }
    let params = RandomCspParams {
        num_vars: n,
        alphabet_size: 2,
        num_constraints: rng.gen_range(1..=n + 1),
        max_arity: 2,
        density: 0.6,
    };
    let budget = Budget::default();
    loop {
        let p = random_csp(rng, &params)?;
        let inst = p.instance();
        let sols: Vec<Assignment> = inst
            .enumerate_assignments(&budget)?
            .filter(|a| inst.is_solution(a).unwrap_or(false) && a != p.ini())
            .collect();
        if sols.is_empty() {
            continue;
        }
        let tar = sols[rng.gen_range(0..sols.len())].clone();
        let cand = ReconfigProblem::new(inst.clone(), p.ini().clone(), tar)?;
        if let Some(path) = exact_path(&cand, &budget)? {
            return Ok((cand, path));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::reconfig::{reconfig_value, verify_path};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn families() {
        let eq = equality_chain(2).unwrap();
        assert_eq!(eq.ini(), &Assignment::new(vec![0, 0]));
        assert_eq!(eq.tar(), &Assignment::new(vec![1, 1]));
        assert_eq!(reconfig_value(&eq, &Budget::default()).unwrap(), ratio(0, 1));
        assert_eq!(reconfig_value(&equality_chain(4).unwrap(), &Budget::default()).unwrap(), ratio(2, 3));

        let or = or_chain(5).unwrap();
        assert_eq!(or.ini(), &Assignment::new(vec![1, 0, 1, 0, 1]));
        assert_eq!(reconfig_value(&or, &Budget::default()).unwrap(), ratio(1, 1));
        assert!(equality_chain(1).is_err());
    }

    #[test]
    fn generators_are_deterministic_and_planted() {
        let params = RandomCspParams {
            num_vars: 4,
            alphabet_size: 3,
            num_constraints: 5,
            max_arity: 3,
            density: 0.2,
        };
        let a = random_csp(&mut ChaCha8Rng::seed_from_u64(1), &params).unwrap();
        let b = random_csp(&mut ChaCha8Rng::seed_from_u64(1), &params).unwrap();
        assert_eq!(a.serialize().unwrap(), b.serialize().unwrap());
        assert!(!a.is_relaxed());
        assert_eq!(ReconfigProblem::parse(&a.serialize().unwrap()).unwrap(), a);
    }

    #[test]
    fn yes_sources_have_exact_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3, 2, 3] {
            let (p, path) = random_yes_source(&mut rng, n).unwrap();
            assert_ne!(p.ini(), p.tar());
            assert!(verify_path(&p, &path, &ratio(1, 1)));
        }
    }
}
