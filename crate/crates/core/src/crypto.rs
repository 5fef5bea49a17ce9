//! Mock homomorphic encryption: ciphertexts are random 128-bit handles
//! into a plaintext store that only the secret key can read.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::field::Value;
use crate::ir::{Op, Program, SelectorId, Statement};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ciphertext(u128);

impl Ciphertext {
    pub fn handle(self) -> u128 {
        self.0
    }
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({:032x})", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("ciphertext {0:032x} was not issued by this key")]
    ForeignCiphertext(u128),
}

/// Holds the plaintext store. Reads may run concurrently; writes are
/// serialized.
pub struct SecretKey {
    seed: u64,
    rng: Mutex<ChaCha20Rng>,
    store: RwLock<HashMap<u128, Value>>,
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKey")
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

impl SecretKey {
    pub fn keygen(seed: u64) -> Self {
        SecretKey {
            seed,
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(seed)),
            store: RwLock::new(HashMap::new()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn enc(&self, v: Value) -> Ciphertext {
        let mut rng = self.rng.lock().expect("rng lock poisoned");
        let mut store = self.store.write().expect("store lock poisoned");
        loop {
            let h: u128 = rng.gen();
            if let std::collections::hash_map::Entry::Vacant(e) = store.entry(h) {
                e.insert(v);
                return Ciphertext(h);
            }
        }
    }

    pub fn dec(&self, c: Ciphertext) -> Result<Value, CryptoError> {
        self.store
            .read()
            .expect("store lock poisoned")
            .get(&c.0)
            .copied()
            .ok_or(CryptoError::ForeignCiphertext(c.0))
    }

    pub fn he_op(&self, op: Op, a: Ciphertext, b: Ciphertext) -> Result<Ciphertext, CryptoError> {
        let x = self.dec(a)?;
        let y = self.dec(b)?;
        Ok(self.enc(op.apply(x, y)))
    }

    pub fn len(&self) -> usize {
        self.store.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("selector {0} has no bit in the key")]
    MissingSelector(SelectorId),
    #[error("key has {key} selectors but the program has {program}")]
    SelectorCountMismatch { key: usize, program: usize },
    #[error("combine into `{target}` has {ones} selectors set, expected exactly one")]
    NotOneHot { target: String, ones: usize },
    #[error("key file line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Plaintext selector bits, one per Combine option.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SelectorKey {
    pub bits: BTreeMap<SelectorId, bool>,
}

impl SelectorKey {
    pub fn bit(&self, s: SelectorId) -> Option<bool> {
        self.bits.get(&s).copied()
    }

    /// Checks that the key covers exactly the program's selectors and sets
    /// one bit per Combine.
    pub fn validate(&self, p: &Program) -> Result<(), KeyError> {
        let selectors = p.selectors();
        if selectors.len() != self.bits.len() {
            return Err(KeyError::SelectorCountMismatch {
                key: self.bits.len(),
                program: selectors.len(),
            });
        }
        for s in &p.statements {
            if let Statement::Combine { target, options } = s {
                let mut ones = 0;
                for o in options {
                    match self.bit(o.selector) {
                        None => return Err(KeyError::MissingSelector(o.selector)),
                        Some(true) => ones += 1,
                        Some(false) => {}
                    }
                }
                if ones != 1 {
                    return Err(KeyError::NotOneHot {
                        target: target.to_string(),
                        ones,
                    });
                }
            }
        }
        Ok(())
    }

    /// Index of the set option in each Combine, in statement order.
    pub fn choices(&self, p: &Program) -> Result<Vec<usize>, KeyError> {
        self.validate(p)?;
        Ok(p.statements
            .iter()
            .filter_map(|s| match s {
                Statement::Combine { options, .. } => {
                    options.iter().position(|o| self.bits[&o.selector])
                }
                _ => None,
            })
            .collect())
    }

    /// Key that sets option `choices[j]` of the `j`-th Combine.
    pub fn from_choices(p: &Program, choices: &[usize]) -> Self {
        let mut bits = BTreeMap::new();
        let combines = p.statements.iter().filter_map(|s| match s {
            Statement::Combine { options, .. } => Some(options),
            _ => None,
        });
        for (options, &c) in combines.zip(choices) {
            for (i, o) in options.iter().enumerate() {
                bits.insert(o.selector, i == c);
            }
        }
        SelectorKey { bits }
    }
}

/// Contents of a key file: the encryption seed and the selector bits.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KeyFile {
    pub seed: u64,
    pub selectors: SelectorKey,
}

impl KeyFile {
    pub fn to_text(&self) -> String {
        let mut out = format!("seed {}\n", self.seed);
        for (s, b) in &self.selectors.bits {
            out.push_str(&format!("sel {s} = {}\n", u8::from(*b)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, KeyError> {
        let mut seed = None;
        let mut bits = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: &str| KeyError::Syntax {
                line: i + 1,
                message: message.to_string(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("seed ") {
                if seed.is_some() {
                    return Err(err("duplicate seed"));
                }
                seed = Some(rest.trim().parse().map_err(|_| err("bad seed"))?);
            } else if let Some(rest) = line.strip_prefix("sel ") {
                let (sel, bit) = rest.split_once('=').ok_or_else(|| err("expected `=`"))?;
                let sel: SelectorId = sel.trim().parse().map_err(|_| err("bad selector"))?;
                let bit = match bit.trim() {
                    "0" => false,
                    "1" => true,
                    _ => return Err(err("selector bit must be 0 or 1")),
                };
                if bits.insert(sel, bit).is_some() {
                    return Err(err("duplicate selector"));
                }
            } else {
                return Err(err("expected `seed` or `sel`"));
            }
        }
        let seed = seed.ok_or(KeyError::Syntax {
            line: 1,
            message: "missing seed header".into(),
        })?;
        Ok(KeyFile {
            seed,
            selectors: SelectorKey { bits },
        })
    }
}
