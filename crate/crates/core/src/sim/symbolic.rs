//! Text rendering of the mean and covariance ODEs.

use std::fmt::Write;

use crate::crn::{Network, RateLaw, SpeciesId};
use crate::expr::RateExpr;

use super::output::format_float;

// Placeholder ids for symbols that are not species. They only live inside
// this module and never reach a Network.
const PARAM_BASE: u32 = 0x8000_0000;
const COV_BASE: u32 = 0xC000_0000;
const OMEGA: u32 = u32::MAX;

fn param(r: usize) -> RateExpr {
    RateExpr::Species(SpeciesId(PARAM_BASE + r as u32))
}

fn cov_symbol(i: usize, j: usize) -> RateExpr {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    RateExpr::Species(SpeciesId(COV_BASE + ((i as u32) << 14) + j as u32))
}

fn flux_expr(network: &Network, r: usize) -> RateExpr {
    let reaction = &network.reactions[r];
    match &reaction.rate {
        RateLaw::MassAction(_) => reaction.reagents.iter().fold(param(r), |acc, (s, m)| {
            RateExpr::mul(acc, RateExpr::pow(RateExpr::Species(s), RateExpr::Const(f64::from(m))))
        }),
        RateLaw::General(e) => e.clone(),
    }
}

fn join_terms(terms: &[(f64, String)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (idx, (coef, factor)) in terms.iter().enumerate() {
        let sign = if *coef < 0.0 { "-" } else { "+" };
        if idx == 0 {
            out.push_str(sign);
        } else {
            let _ = write!(out, " {sign} ");
        }
        let mag = coef.abs();
        if mag != 1.0 {
            let _ = write!(out, "{}*", format_float(mag));
        }
        out.push_str(factor);
    }
    out
}

/// Human-readable ODE system. One `d[X]/dt` line per species and, with
/// `lna`, one `dCov(X,Y)/dt` line per unordered species pair. Mass-action
/// constants appear as `k<reaction index>` with their values listed first.
pub fn symbolic_odes(network: &Network, lna: bool) -> String {
    let names: Vec<String> = network.species.iter().map(|s| s.display_name.clone()).collect();
    let namer = |id: SpeciesId| -> String {
        let v = id.0;
        if v == OMEGA {
            "Omega".into()
        } else if v >= COV_BASE {
            let (i, j) = (((v - COV_BASE) >> 14) as usize, ((v - COV_BASE) & 0x3fff) as usize);
            format!("Cov({},{})", names[i], names[j])
        } else if v >= PARAM_BASE {
            format!("k{}", v - PARAM_BASE)
        } else {
            format!("[{}]", names[id.index()])
        }
    };
    let stoich = network.stoichiometry();
    let fluxes: Vec<RateExpr> = (0..network.reactions.len()).map(|r| flux_expr(network, r)).collect();
    let mut out = String::new();

    for (r, reaction) in network.reactions.iter().enumerate() {
        if let RateLaw::MassAction(k) = reaction.rate {
            let _ = writeln!(out, "k{r} = {}", format_float(k));
        }
    }
    let n = network.species.len();
    for i in 0..n {
        let terms: Vec<(f64, String)> = (0..network.reactions.len())
            .filter(|&r| stoich[i][r] != 0)
            .map(|r| (stoich[i][r] as f64, fluxes[r].display_with(&namer).to_string()))
            .collect();
        let _ = writeln!(out, "d[{}]/dt = {}", names[i], join_terms(&terms));
    }
    if !lna {
        return out;
    }

    // ∂a_r/∂x_m, computed once
    let partials: Vec<Vec<RateExpr>> =
        fluxes.iter().map(|f| (0..n).map(|m| f.derivative(SpeciesId(m as u32))).collect()).collect();
    let omega = RateExpr::Species(SpeciesId(OMEGA));
    for i in 0..n {
        for j in i..n {
            let mut terms: Vec<(f64, String)> = Vec::new();
            let drift = |row: usize, other: usize, terms: &mut Vec<(f64, String)>| {
                for r in 0..network.reactions.len() {
                    let s = stoich[row][r];
                    if s == 0 {
                        continue;
                    }
                    for (m, d) in partials[r].iter().enumerate() {
                        if d.is_zero() {
                            continue;
                        }
                        let c = cov_symbol(m, other);
                        match d.as_const() {
                            Some(v) => terms.push((s as f64 * v, c.display_with(&namer).to_string())),
                            None => {
                                terms.push((s as f64, RateExpr::mul(d.clone(), c).display_with(&namer).to_string()))
                            }
                        }
                    }
                }
            };
            drift(i, j, &mut terms);
            drift(j, i, &mut terms);
            for r in 0..network.reactions.len() {
                let coef = (stoich[i][r] * stoich[j][r]) as f64;
                if coef != 0.0 {
                    let noise = RateExpr::div(fluxes[r].clone(), omega.clone());
                    terms.push((coef, noise.display_with(&namer).to_string()));
                }
            }
            let _ = writeln!(out, "dCov({},{})/dt = {}", names[i], names[j], join_terms(&terms));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::Complex;

    fn decay() -> Network {
        let mut n = Network::new();
        let a = n.add_species("A").id;
        let b = n.add_species("B").id;
        n.add_reaction(Complex::from_pairs([(a, 1)]), Complex::from_pairs([(b, 1)]), RateLaw::MassAction(1.0)).unwrap();
        n
    }

    #[test]
    fn mean_equations() {
        let text = symbolic_odes(&decay(), false);
        assert!(text.contains("d[A]/dt = -k0*[A]\n"), "{text}");
        assert!(text.contains("d[B]/dt = +k0*[A]\n"), "{text}");
        assert!(text.starts_with("k0 = 1\n"));
    }

    #[test]
    fn covariance_equations_per_pair() {
        let text = symbolic_odes(&decay(), true);
        let cov_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("dCov(")).collect();
        assert_eq!(cov_lines.len(), 3);
        assert!(
            cov_lines[0].starts_with("dCov(A,A)/dt = -k0*Cov(A,A) - k0*Cov(A,A) + k0*[A]/Omega"),
            "{}",
            cov_lines[0]
        );
        assert!(
            cov_lines[1].starts_with("dCov(A,B)/dt = -k0*Cov(A,B) + k0*Cov(A,A) - k0*[A]/Omega"),
            "{}",
            cov_lines[1]
        );
    }

    #[test]
    fn empty_network_is_empty_text() {
        assert_eq!(symbolic_odes(&Network::new(), true), "");
    }

    #[test]
    fn multiplicities_and_powers() {
        let mut n = Network::new();
        let a = n.add_species("A").id;
        n.add_reaction(Complex::from_pairs([(a, 2)]), Complex::new(), RateLaw::MassAction(0.5)).unwrap();
        let text = symbolic_odes(&n, false);
        assert!(text.contains("d[A]/dt = -2*k0*[A]^2"), "{text}");
    }
}
