use timoshenko_core::{Executor, Serial};

/// Runs both halves of a [`Executor::join`] on the rayon pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        rayon::join(a, b)
    }
}

/// Serial or rayon, chosen at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Serial,
    Rayon,
}

impl Choice {
    pub fn from_flag(parallel: bool) -> Self {
        if parallel {
            Choice::Rayon
        } else {
            Choice::Serial
        }
    }

    pub fn is_parallel(self) -> bool {
        self == Choice::Rayon
    }
}

impl Executor for Choice {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            Choice::Serial => Serial.join(a, b),
            Choice::Rayon => Rayon.join(a, b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_returns_in_order() {
        for e in [Choice::Serial, Choice::Rayon] {
            assert_eq!(e.join(|| 1, || "b"), (1, "b"));
        }
    }
}
