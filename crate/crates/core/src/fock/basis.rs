use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest number of fermion modes; the fermion factor has `2^modes` states.
pub const MAX_MODES: usize = 20;

/// Largest basis dimension the library will assemble.
pub const MAX_DIMENSION: usize = 400_000;

/// Truncated boson ⊗ fermion occupation basis over a shared set of modes.
///
/// State index = `boson_config_index * 2^modes + fermion_mask`; the vacuum has
/// index 0 because the empty boson configuration is enumerated first.
#[derive(Debug, Clone)]
pub struct FockBasis {
    modes: usize,
    boson_cap: usize,
    boson_configs: Vec<Vec<u8>>,
    boson_index: HashMap<Vec<u8>, usize>,
}

impl FockBasis {
    pub fn new(modes: usize, boson_cap: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::domain("basis needs at least one mode"));
        }
        if modes > MAX_MODES {
            return Err(Error::BudgetExceeded {
                what: "number of modes",
                limit: MAX_MODES,
                requested: modes,
            });
        }
        let mut configs = Vec::new();
        for total in 0..=boson_cap {
            let mut cur = vec![0u8; modes];
            push_configs(&mut cur, 0, total, &mut configs);
        }
        let dim = configs.len().saturating_mul(1usize << modes);
        if dim > MAX_DIMENSION {
            return Err(Error::BudgetExceeded {
                what: "Fock space dimension",
                limit: MAX_DIMENSION,
                requested: dim,
            });
        }
        let boson_index = configs
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(Self {
            modes,
            boson_cap,
            boson_configs: configs,
            boson_index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn boson_cap(&self) -> usize {
        self.boson_cap
    }

    pub fn boson_config_count(&self) -> usize {
        self.boson_configs.len()
    }

    pub fn dim(&self) -> usize {
        self.boson_configs.len() << self.modes
    }

    pub fn vacuum(&self) -> usize {
        0
    }

    pub fn index(&self, bosons: &[u8], fermions: u32) -> Option<usize> {
        self.boson_index
            .get(bosons)
            .map(|&b| (b << self.modes) | fermions as usize)
    }

    pub fn state(&self, idx: usize) -> (&[u8], u32) {
        let b = idx >> self.modes;
        let f = (idx & ((1usize << self.modes) - 1)) as u32;
        (&self.boson_configs[b], f)
    }

    pub fn boson_number(&self, idx: usize) -> usize {
        self.state(idx).0.iter().map(|&n| n as usize).sum()
    }

    pub fn fermion_number(&self, idx: usize) -> usize {
        self.state(idx).1.count_ones() as usize
    }
}

fn push_configs(cur: &mut Vec<u8>, pos: usize, remaining: usize, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for n in (0..=remaining).rev() {
        cur[pos] = n as u8;
        push_configs(cur, pos + 1, remaining - n, out);
    }
    cur[pos] = 0;
}
