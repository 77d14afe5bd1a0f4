use super::{AtomicGraph, Charge, Coefficient, EdgeKind, GraphBuilder};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use Charge::{Minus, Plus};
use EdgeKind::{Gminus, Gplus, Splus, Sminus, Theta, S};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CatalogTag {
    /// The two summands beyond second order, externals `a, b1, b2`.
    A2,
    /// The nine third-order summands (a)-(i), externals `a, b1, b2`.
    A3,
    /// Six deterministic sixth-order self-energy graphs, externals `x, y`.
    E6,
}

impl FromStr for CatalogTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A2" | "a2" => Ok(Self::A2),
            "A3" | "a3" => Ok(Self::A3),
            "E6" | "e6" => Ok(Self::E6),
            other => Err(Error::InvalidArgument(format!("unknown catalog tag {other:?} (expected A2, A3 or E6)"))),
        }
    }
}

fn t_graph(name: &str, internal: &[&str]) -> GraphBuilder {
    let mut b = GraphBuilder::new(name).external("a").external("b1").external("b2");
    for v in internal {
        b = b.internal(v);
    }
    b
}

fn absm2() -> Coefficient {
    Coefficient::monomial(1, 1)
}

fn a2() -> Result<Vec<AtomicGraph>> {
    Ok(vec![
        // m Theta_ax s_xy (G_yy - m) G_xb1 conj(G_xb2)
        t_graph("A2.1", &["x", "y"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .weight("y", Plus, true)
            .edge("x", "b1", Gplus)
            .edge("x", "b2", Gminus)
            .coefficient(Coefficient::monomial(1, 0))
            .build()?,
        // m Theta_ax s_xy (conj(G_xx) - conj(m)) G_yb1 conj(G_yb2)
        t_graph("A2.2", &["x", "y"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .weight("x", Minus, true)
            .edge("y", "b1", Gplus)
            .edge("y", "b2", Gminus)
            .coefficient(Coefficient::monomial(1, 0))
            .build()?,
    ])
}

fn a3() -> Result<Vec<AtomicGraph>> {
    Ok(vec![
        // Theta_ax S+_xα s_αβ (G_αα - m)(G_ββ - m) G_xb1 conj(G_xb2)
        t_graph("A3.a", &["x", "alpha", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "alpha", Splus)
            .edge("alpha", "beta", S)
            .weight("alpha", Plus, true)
            .weight("beta", Plus, true)
            .edge("x", "b1", Gplus)
            .edge("x", "b2", Gminus)
            .build()?,
        // |m|^2 Theta_ax s_xy s_xβ (conj G_xx - conj m)(conj G_ββ - conj m) G_yb1 conj(G_yb2)
        t_graph("A3.b", &["x", "y", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .edge("x", "beta", S)
            .weight("x", Minus, true)
            .weight("beta", Minus, true)
            .edge("y", "b1", Gplus)
            .edge("y", "b2", Gminus)
            .coefficient(absm2())
            .build()?,
        // |m|^2 Theta_ax s_xy S-_xα s_αβ (conj G_αα - conj m)(conj G_ββ - conj m) G_yb1 conj(G_yb2)
        t_graph("A3.c", &["x", "y", "alpha", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .edge("x", "alpha", Sminus)
            .edge("alpha", "beta", S)
            .weight("alpha", Minus, true)
            .weight("beta", Minus, true)
            .edge("y", "b1", Gplus)
            .edge("y", "b2", Gminus)
            .coefficient(absm2())
            .build()?,
        // Theta_ax S+_xα s_αβ G_βα G_xβ G_αb1 conj(G_xb2)
        t_graph("A3.d", &["x", "alpha", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "alpha", Splus)
            .edge("alpha", "beta", S)
            .edge("beta", "alpha", Gplus)
            .edge("x", "beta", Gplus)
            .edge("alpha", "b1", Gplus)
            .edge("x", "b2", Gminus)
            .build()?,
        // Theta_ax S+_xα s_αβ G_βα G_xb1 conj(G_xα) conj(G_βb2)
        t_graph("A3.e", &["x", "alpha", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "alpha", Splus)
            .edge("alpha", "beta", S)
            .edge("beta", "alpha", Gplus)
            .edge("x", "b1", Gplus)
            .edge("x", "alpha", Gminus)
            .edge("beta", "b2", Gminus)
            .build()?,
        // |m|^2 Theta_ax s_xy s_xβ conj(G_βx) G_yx G_βb1 conj(G_yb2)
        t_graph("A3.f", &["x", "y", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .edge("x", "beta", S)
            .edge("beta", "x", Gminus)
            .edge("y", "x", Gplus)
            .edge("beta", "b1", Gplus)
            .edge("y", "b2", Gminus)
            .coefficient(absm2())
            .build()?,
        // |m|^2 Theta_ax s_xy s_xβ conj(G_βx) G_yb1 conj(G_yβ) conj(G_xb2)
        t_graph("A3.g", &["x", "y", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .edge("x", "beta", S)
            .edge("beta", "x", Gminus)
            .edge("y", "b1", Gplus)
            .edge("y", "beta", Gminus)
            .edge("x", "b2", Gminus)
            .coefficient(absm2())
            .build()?,
        // |m|^2 Theta_ax s_xy S-_xα s_αβ conj(G_βα) G_yα G_βb1 conj(G_yb2)
        t_graph("A3.h", &["x", "y", "alpha", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .edge("x", "alpha", Sminus)
            .edge("alpha", "beta", S)
            .edge("beta", "alpha", Gminus)
            .edge("y", "alpha", Gplus)
            .edge("beta", "b1", Gplus)
            .edge("y", "b2", Gminus)
            .coefficient(absm2())
            .build()?,
        // |m|^2 Theta_ax s_xy S-_xα s_αβ conj(G_βα) G_yb1 conj(G_yβ) conj(G_αb2)
        t_graph("A3.i", &["x", "y", "alpha", "beta"])
            .edge("a", "x", Theta)
            .edge("x", "y", S)
            .edge("x", "alpha", Sminus)
            .edge("alpha", "beta", S)
            .edge("beta", "alpha", Gminus)
            .edge("y", "b1", Gplus)
            .edge("y", "beta", Gminus)
            .edge("alpha", "b2", Gminus)
            .coefficient(absm2())
            .build()?,
    ])
}

fn e_graph(name: &str, internal: &[&str]) -> GraphBuilder {
    let mut b = GraphBuilder::new(name).external("x").external("y");
    for v in internal {
        b = b.internal(v);
    }
    b
}

/// Monomials as displayed; the scalar prefactors are not printed and default to 1.
fn e6() -> Result<Vec<AtomicGraph>> {
    let mono = |m, mb| Coefficient::monomial(m, mb).placeholder();
    Ok(vec![
        // m^2 δ_xy s_xx S+_xx
        e_graph("E6.d'", &[])
            .edge("x", "y", EdgeKind::Dotted)
            .edge("x", "x", S)
            .edge("x", "x", Splus)
            .coefficient(mono(2, 0))
            .build()?,
        // |m|^4 s_yy s_xy S-_xy
        e_graph("E6.h'", &[])
            .edge("y", "y", S)
            .edge("x", "y", S)
            .edge("x", "y", Sminus)
            .coefficient(mono(2, 2))
            .build()?,
        // |m|^2 S-_xy sum_γ1 s_yγ1 S-_yγ1 Theta_xγ1
        e_graph("E6.i4'", &["gamma1"])
            .edge("x", "y", Sminus)
            .edge("y", "gamma1", S)
            .edge("y", "gamma1", Sminus)
            .edge("x", "gamma1", Theta)
            .coefficient(mono(1, 1))
            .build()?,
        // |m|^2 conj(m)^2 s_xy sum_{α,γ2} S-_xα S-_yα S-_αγ2 s_yγ2
        e_graph("E6.i5'", &["alpha", "gamma2"])
            .edge("x", "y", S)
            .edge("x", "alpha", Sminus)
            .edge("y", "alpha", Sminus)
            .edge("alpha", "gamma2", Sminus)
            .edge("y", "gamma2", S)
            .coefficient(mono(1, 3))
            .build()?,
        // |m|^2 m^2 Theta_xx (s_xy)^2
        e_graph("E6.f4'", &[])
            .edge("x", "x", Theta)
            .edge("x", "y", S)
            .edge("x", "y", S)
            .coefficient(mono(3, 1))
            .build()?,
        // |m|^4 (s_xy)^2 Theta_xy
        e_graph("E6.f1.1'", &[])
            .edge("x", "y", S)
            .edge("x", "y", S)
            .edge("x", "y", Theta)
            .coefficient(mono(2, 2))
            .build()?,
    ])
}

pub fn catalog(tag: CatalogTag) -> Result<Vec<AtomicGraph>> {
    match tag {
        CatalogTag::A2 => a2(),
        CatalogTag::A3 => a3(),
        CatalogTag::E6 => e6(),
    }
}
