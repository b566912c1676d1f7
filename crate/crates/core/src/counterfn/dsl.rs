use num_bigint::BigUint;

use super::CounterFn;
use crate::error::{Error, Result};

/// Parses the counterfunction DSL.
///
/// ```text
/// F := id | zero | const:K | scale:A/D
///    | add(F,G) | mul(F,G) | max(F,G) | compose(F,G)
/// ```
///
/// `compose(F,G)` is `n ↦ F(G(n))`. No whitespace is allowed.
pub fn parse_counterfn(src: &str) -> Result<CounterFn> {
    let mut p = Parser { src, pos: 0 };
    let f = p.expr()?;
    if p.pos != src.len() {
        return Err(p.error("trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, what: &str) -> Error {
        Error::invalid(format!(
            "counterfunction {:?}: {what} at offset {}",
            self.src, self.pos
        ))
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {token:?}")))
        }
    }

    fn natural(&mut self) -> Result<BigUint> {
        let len = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return Err(self.error("expected a decimal natural"));
        }
        let digits = &self.rest()[..len];
        self.pos += len;
        Ok(digits.parse().expect("digits only"))
    }

    fn pair(&mut self) -> Result<(CounterFn, CounterFn)> {
        self.expect("(")?;
        let f = self.expr()?;
        self.expect(",")?;
        let g = self.expr()?;
        self.expect(")")?;
        Ok((f, g))
    }

    fn expr(&mut self) -> Result<CounterFn> {
        if self.eat("id") {
            return Ok(CounterFn::identity());
        }
        if self.eat("zero") {
            return Ok(CounterFn::zero());
        }
        if self.eat("const:") {
            return Ok(CounterFn::constant(self.natural()?));
        }
        if self.eat("scale:") {
            let a = self.natural()?;
            self.expect("/")?;
            let d = self.natural()?;
            return CounterFn::ceil_scale(a, d).map_err(|_| self.error("zero scale denominator"));
        }
        if self.eat("add") {
            let (f, g) = self.pair()?;
            return Ok(CounterFn::add(&f, &g));
        }
        if self.eat("mul") {
            let (f, g) = self.pair()?;
            return Ok(CounterFn::mul(&f, &g));
        }
        if self.eat("max") {
            let (f, g) = self.pair()?;
            return Ok(CounterFn::max(&f, &g));
        }
        if self.eat("compose") {
            let (f, g) = self.pair()?;
            return Ok(CounterFn::compose(&f, &g));
        }
        Err(self.error("unknown primitive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(src: &str, n: u64) -> u64 {
        parse_counterfn(src).unwrap().eval_u64(n).unwrap()
    }

    #[test]
    fn primitives() {
        assert_eq!(at("id", 7), 7);
        assert_eq!(at("zero", 7), 0);
        assert_eq!(at("const:5", 7), 5);
        assert_eq!(at("scale:3/2", 7), 11);
        assert_eq!(at("add(id,const:2)", 7), 9);
        assert_eq!(at("mul(id,id)", 7), 49);
        assert_eq!(at("max(const:3,id)", 1), 3);
        assert_eq!(at("compose(mul(id,id),add(id,const:1))", 2), 9);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "ID",
            "add(id)",
            "add(id,id",
            "const:",
            "scale:1",
            "scale:1/0",
            "id ",
            "add(id, id)",
            "const:-1",
        ] {
            let err = parse_counterfn(bad).unwrap_err();
            assert!(
                matches!(err, Error::InvalidInput(_)),
                "{bad:?} gave {err:?}"
            );
        }
    }

    #[test]
    fn round_trips_through_display() {
        let src = "compose(max(id,scale:12/1),add(const:3,mul(id,zero)))";
        assert_eq!(parse_counterfn(src).unwrap().to_string(), src);
    }

    fn arb_src() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("id".to_string()),
            Just("zero".to_string()),
            (0u32..9).prop_map(|k| format!("const:{k}")),
            (0u32..9, 1u32..5).prop_map(|(a, d)| format!("scale:{a}/{d}")),
        ];
        leaf.prop_recursive(3, 12, 2, |inner| {
            (
                prop::sample::select(vec!["add", "mul", "max", "compose"]),
                inner.clone(),
                inner,
            )
                .prop_map(|(op, f, g)| format!("{op}({f},{g})"))
        })
    }

    proptest! {
        #[test]
        fn parse_display_identity(src in arb_src()) {
            let f = parse_counterfn(&src).unwrap();
            prop_assert_eq!(f.to_string(), src);
            prop_assert!(f.is_monotone());
        }
    }
}
