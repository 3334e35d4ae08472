//! Delone set generators: primitive substitution tilings, golden
//! cut-and-project sets, periodic lattices, and products of two 1D sets.
//!
//! One-dimensional sets are tilings of the line whose left endpoints form
//! the point set. Points of a substitution tiling are addressed by a path in
//! the supertile hierarchy: step `k` records the type of the level-`k`
//! supertile around the origin and its position inside the level-`k+1`
//! supertile. An address is a finite prefix followed by a periodic tail.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::golden::GoldenNumber;

pub type Letter = u8;

/// Generator description of a Delone set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeloneSpec {
    Substitution {
        rule: BTreeMap<String, String>,
        lengths: BTreeMap<String, String>,
    },
    CutAndProject {
        window: [String; 2],
        slope: String,
    },
    Periodic {
        basis: Vec<String>,
    },
    Product {
        factors: Vec<DeloneSpec>,
    },
}

impl DeloneSpec {
    /// Fibonacci substitution a→ab, b→a with tile lengths φ and 1.
    pub fn fibonacci() -> Self {
        DeloneSpec::Substitution {
            rule: [("a", "ab"), ("b", "a")]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            lengths: [("a", "phi"), ("b", "1")]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// The integer lattice Z.
    pub fn integers() -> Self {
        DeloneSpec::Periodic {
            basis: vec!["1".into()],
        }
    }

    /// Golden cut-and-project set with window [-1, φ-1), which reproduces
    /// the Fibonacci point set.
    pub fn fibonacci_cut_and_project() -> Self {
        DeloneSpec::CutAndProject {
            window: ["-1".into(), "-1+phi".into()],
            slope: "phi".into(),
        }
    }

    pub fn product(a: DeloneSpec, b: DeloneSpec) -> Self {
        DeloneSpec::Product { factors: vec![a, b] }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn dimension(&self) -> usize {
        match self {
            DeloneSpec::Product { factors } => factors.iter().map(|f| f.dimension()).sum(),
            DeloneSpec::Periodic { basis } => basis.len(),
            _ => 1,
        }
    }

    pub fn build(&self) -> Result<DeloneSet> {
        match self {
            DeloneSpec::Product { factors } => {
                if factors.len() != 2 {
                    return input("a product needs exactly two factors");
                }
                let a = factors[0].build_line()?;
                let b = factors[1].build_line()?;
                Ok(DeloneSet::Plane(Box::new([a, b])))
            }
            DeloneSpec::Periodic { basis } if basis.len() == 2 => {
                let a = DeloneSpec::Periodic {
                    basis: vec![basis[0].clone()],
                };
                let b = DeloneSpec::Periodic {
                    basis: vec![basis[1].clone()],
                };
                Ok(DeloneSet::Plane(Box::new([a.build_line()?, b.build_line()?])))
            }
            _ => Ok(DeloneSet::Line(self.build_line()?)),
        }
    }

    /// Builds a one-dimensional tiling; errors for planar specs.
    pub fn build_line(&self) -> Result<Tiling> {
        match self {
            DeloneSpec::Substitution { rule, lengths } => Ok(Tiling::Substitution(Substitution::new(rule, lengths)?)),
            DeloneSpec::CutAndProject { window, slope } => Ok(Tiling::CutAndProject(CutProject::new(window, slope)?)),
            DeloneSpec::Periodic { basis } => {
                if basis.len() != 1 {
                    return input("a one-dimensional lattice needs one basis vector");
                }
                let spacing: GoldenNumber = basis[0].parse()?;
                if spacing.signum() <= 0 {
                    return input("lattice basis must be positive");
                }
                Ok(Tiling::Periodic(Periodic { spacing }))
            }
            DeloneSpec::Product { .. } => Err(Error::Unsupported("product specs are two-dimensional".into())),
        }
    }
}

/// A compiled Delone set.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum DeloneSet {
    Line(Tiling),
    Plane(Box<[Tiling; 2]>),
}

impl DeloneSet {
    pub fn dimension(&self) -> usize {
        match self {
            DeloneSet::Line(_) => 1,
            DeloneSet::Plane(_) => 2,
        }
    }
}

/// One step of a supertile address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub letter: Letter,
    pub pos: u16,
}

/// Eventually periodic supertile path; empty for lattices and
/// cut-and-project sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address {
    pub prefix: Vec<Step>,
    pub tail: Vec<Step>,
}

impl Address {
    pub fn empty() -> Self {
        Address::default()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty() && self.tail.is_empty()
    }

    /// Shortest prefix and tail describing the same path.
    pub fn canonical(mut self) -> Self {
        if self.tail.is_empty() {
            return self;
        }
        let n = self.tail.len();
        let period = (1..=n)
            .find(|&p| n.is_multiple_of(p) && (0..n).all(|k| self.tail[k] == self.tail[k % p]))
            .unwrap_or(n);
        self.tail.truncate(period);
        while let Some(&last) = self.prefix.last() {
            if last != *self.tail.last().unwrap() {
                break;
            }
            self.prefix.pop();
            self.tail.rotate_right(1);
        }
        self
    }

    pub fn step(&self, k: usize) -> Step {
        if k < self.prefix.len() {
            self.prefix[k]
        } else {
            self.tail[(k - self.prefix.len()) % self.tail.len()]
        }
    }
}

/// A tile of a one-dimensional tiling, `[start, start + len)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tile {
    pub start: GoldenNumber,
    pub len: GoldenNumber,
    pub x: f64,
    pub width: f64,
    pub letter: Letter,
    /// Transversal cell of the tile at the requested level.
    pub cell: u32,
}

/// Transversal cell at a given level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellInfo {
    /// Letter of the tile itself.
    pub letter: Letter,
    /// Type of the enclosing supertile at this level.
    pub ancestor: Letter,
    /// Tile index inside that supertile.
    pub index: u64,
    /// Cell one level up.
    pub parent: Option<u32>,
    /// Transversal measure per tile.
    pub weight: f64,
}

/// One-dimensional Delone set seen as a tiling of the line.
#[derive(Clone, Debug)]
pub enum Tiling {
    Substitution(Substitution),
    CutAndProject(CutProject),
    Periodic(Periodic),
}

impl Tiling {
    pub fn alphabet_size(&self) -> usize {
        match self {
            Tiling::Substitution(s) => s.names.len(),
            Tiling::CutAndProject(c) => c.lengths.len(),
            Tiling::Periodic(_) => 1,
        }
    }

    pub fn letter_name(&self, l: Letter) -> char {
        match self {
            Tiling::Substitution(s) => s.names[l as usize],
            _ => (b'a' + l) as char,
        }
    }

    pub fn letter_index(&self, c: char) -> Result<Letter> {
        (0..self.alphabet_size() as Letter)
            .find(|&l| self.letter_name(l) == c)
            .ok_or_else(|| Error::Input(format!("unknown letter {c:?}")))
    }

    pub fn letter_length(&self, l: Letter) -> GoldenNumber {
        match self {
            Tiling::Substitution(s) => s.lengths[l as usize],
            Tiling::CutAndProject(c) => c.lengths[l as usize],
            Tiling::Periodic(p) => p.spacing,
        }
    }

    /// Per-tile letter frequencies.
    pub fn letter_frequencies(&self) -> Vec<f64> {
        match self {
            Tiling::Substitution(s) => s.freq.clone(),
            Tiling::CutAndProject(c) => c.freq.clone(),
            Tiling::Periodic(_) => vec![1.0],
        }
    }

    /// Average tile length (inverse point density).
    pub fn mean_tile_length(&self) -> f64 {
        let f = self.letter_frequencies();
        (0..self.alphabet_size())
            .map(|l| f[l] * self.letter_length(l as Letter).to_f64())
            .sum()
    }

    pub fn min_tile_length(&self) -> GoldenNumber {
        (0..self.alphabet_size() as Letter)
            .map(|l| self.letter_length(l))
            .min()
            .expect("nonempty alphabet")
    }

    pub fn max_tile_length(&self) -> GoldenNumber {
        (0..self.alphabet_size() as Letter)
            .map(|l| self.letter_length(l))
            .max()
            .expect("nonempty alphabet")
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Tiling::Periodic(_))
    }

    /// Address of the reference point set used by `patch` and friends.
    pub fn canonical_address(&self) -> Address {
        match self {
            Tiling::Substitution(s) => s.canonical.clone(),
            _ => Address::empty(),
        }
    }

    /// Deepest supported transversal level.
    pub fn max_level(&self) -> usize {
        match self {
            Tiling::Substitution(s) => s.max_cell_level,
            Tiling::CutAndProject(_) => 0,
            Tiling::Periodic(_) => usize::MAX,
        }
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if level > self.max_level() {
            return Err(Error::Unsupported(format!(
                "transversal level {level} exceeds the supported depth {}",
                self.max_level()
            )));
        }
        Ok(())
    }

    /// Tiles of the transversal point with this address meeting `[lo, hi]`,
    /// sorted, with cells at the given level.
    pub fn expand(&self, addr: &Address, lo: f64, hi: f64, level: usize) -> Result<Vec<Tile>> {
        self.check_level(level)?;
        match self {
            Tiling::Substitution(s) => s.expand(addr, lo, hi, level),
            Tiling::CutAndProject(c) => c.expand(lo, hi),
            Tiling::Periodic(p) => Ok(p.expand(lo, hi)),
        }
    }

    /// Number of transversal cells at a level.
    pub fn cell_count(&self, level: usize) -> Result<usize> {
        Ok(self.cells(level)?.len())
    }

    /// Cell table at a level, with per-tile transversal weights.
    pub fn cells(&self, level: usize) -> Result<Vec<CellInfo>> {
        self.check_level(level)?;
        match self {
            Tiling::Substitution(s) => Ok(s.cells(level)),
            Tiling::CutAndProject(c) => Ok(c
                .freq
                .iter()
                .enumerate()
                .map(|(l, &w)| CellInfo {
                    letter: l as Letter,
                    ancestor: l as Letter,
                    index: 0,
                    parent: None,
                    weight: w,
                })
                .collect()),
            Tiling::Periodic(_) => Ok(vec![CellInfo {
                letter: 0,
                ancestor: 0,
                index: 0,
                parent: if level > 0 { Some(0) } else { None },
                weight: 1.0,
            }]),
        }
    }

    /// If both transversal points lie on one orbit, the exact `D` with
    /// `Λ_y = Λ_x − D`. Lattices return 0 (the displacement is defined
    /// modulo the period).
    pub fn orbit_displacement(&self, x: &Address, y: &Address) -> Option<GoldenNumber> {
        match self {
            Tiling::Substitution(s) => s.orbit_displacement(x, y),
            _ => Some(GoldenNumber::ZERO),
        }
    }

    /// Address of `Λ − p` for a point `p` of the transversal point `Λ`.
    pub fn reroot(&self, addr: &Address, p: GoldenNumber) -> Result<Address> {
        match self {
            Tiling::Substitution(s) => s.reroot(addr, p),
            Tiling::Periodic(per) => {
                if !is_multiple(p, per.spacing) {
                    return Err(Error::Domain(format!("{p} is not a lattice point")));
                }
                Ok(Address::empty())
            }
            Tiling::CutAndProject(c) => {
                if !p.is_zero() {
                    // only the canonical orbit is represented
                    let pf = p.to_f64();
                    let tiles = c.expand(pf - 1.0, pf + 1.0)?;
                    if tiles.iter().any(|t| t.start == p) {
                        return Err(Error::Unsupported(
                            "cut-and-project hull points are kept on the reference orbit".into(),
                        ));
                    }
                    return Err(Error::Domain(format!("{p} is not a point of the set")));
                }
                Ok(Address::empty())
            }
        }
    }

    pub fn parse_address(&self, prefix: &[String], tail: Option<&[String]>) -> Result<Address> {
        match self {
            Tiling::Substitution(s) => s.parse_address(prefix, tail),
            _ => {
                if !prefix.is_empty() || tail.is_some_and(|t| !t.is_empty()) {
                    return input("lattice and cut-and-project points take an empty address");
                }
                Ok(Address::empty())
            }
        }
    }

    pub fn address_tokens(&self, addr: &Address) -> (Vec<String>, Vec<String>) {
        match self {
            Tiling::Substitution(s) => (
                s.step_tokens(&addr.prefix, addr.tail.first()),
                s.step_tokens(&addr.tail, addr.tail.first()),
            ),
            _ => (Vec::new(), Vec::new()),
        }
    }

    /// Exact points of the transversal point `addr` inside `[lo, hi]`.
    pub fn points(&self, addr: &Address, lo: f64, hi: f64) -> Result<Vec<GoldenNumber>> {
        Ok(self
            .expand(addr, lo, hi, 0)?
            .into_iter()
            .filter(|t| t.x >= lo && t.x <= hi)
            .map(|t| t.start)
            .collect())
    }

    /// Consecutive level-`i` cells `(c, next)` with their per-tile
    /// frequency; the weights sum to 1.
    pub fn cell_pairs(&self, level: usize) -> Result<Vec<(u32, u32, f64)>> {
        self.check_level(level)?;
        match self {
            Tiling::Substitution(s) => Ok(s.cell_pairs(level)),
            Tiling::Periodic(_) => Ok(vec![(0, 0, 1.0)]),
            Tiling::CutAndProject(_) => Err(Error::Unsupported(
                "cell pair frequencies need a substitution or lattice".into(),
            )),
        }
    }

    /// Letter word of the canonical set over tiles starting in `[lo, hi)`.
    pub fn canonical_word(&self, lo: f64, hi: f64) -> Result<Vec<Letter>> {
        let tiles = self.expand(&self.canonical_address(), lo, hi, 0)?;
        Ok(tiles
            .iter()
            .filter(|t| t.x >= lo && t.x < hi)
            .map(|t| t.letter)
            .collect())
    }
}

fn is_multiple(p: GoldenNumber, l: GoldenNumber) -> bool {
    let k = (p.to_f64() / l.to_f64()).round() as i64;
    l * k == p
}

/// Primitive substitution with tile lengths in Z[φ].
#[derive(Clone, Debug)]
pub struct Substitution {
    names: Vec<char>,
    images: Vec<Vec<Letter>>,
    lengths: Vec<GoldenNumber>,
    /// Length of σ^k(x), indexed [k][x].
    super_len: Vec<Vec<GoldenNumber>>,
    /// Tile count of σ^k(x).
    super_count: Vec<Vec<u64>>,
    freq: Vec<f64>,
    lambda: f64,
    max_cell_level: usize,
    default_tail: Vec<Step>,
    canonical: Address,
}

const MAX_CELLS: u64 = 1 << 20;

impl Substitution {
    fn new(rule: &BTreeMap<String, String>, lengths: &BTreeMap<String, String>) -> Result<Self> {
        let mut names = Vec::new();
        for k in rule.keys() {
            let mut cs = k.chars();
            match (cs.next(), cs.next()) {
                (Some(c), None) => names.push(c),
                _ => return input(format!("substitution keys must be single letters, got {k:?}")),
            }
        }
        if names.is_empty() {
            return input("empty substitution rule");
        }
        let index = |c: char| -> Result<Letter> {
            names
                .iter()
                .position(|&n| n == c)
                .map(|i| i as Letter)
                .ok_or_else(|| Error::Input(format!("unknown letter {c:?} in rule")))
        };
        let mut images = Vec::new();
        for img in rule.values() {
            if img.is_empty() {
                return input("substitution images must be nonempty");
            }
            images.push(img.chars().map(index).collect::<Result<Vec<_>>>()?);
        }
        let mut lens = Vec::new();
        for &c in &names {
            let s = lengths
                .get(&c.to_string())
                .ok_or_else(|| Error::Input(format!("missing tile length for {c:?}")))?;
            let g: GoldenNumber = s.parse()?;
            if g.signum() <= 0 {
                return input(format!("tile length for {c:?} must be positive"));
            }
            lens.push(g);
        }
        if lengths.len() != names.len() {
            return input("tile lengths given for letters outside the alphabet");
        }
        let n = names.len();
        if !is_primitive(&images, n) {
            return input("substitution rule is not primitive");
        }

        let mut super_len = vec![lens.clone()];
        let mut super_count = vec![vec![1u64; n]];
        let limit = 1i64 << 58;
        loop {
            let prev_len = super_len.last().unwrap();
            let prev_count = super_count.last().unwrap();
            let next_len: Vec<GoldenNumber> = images
                .iter()
                .map(|img| img.iter().map(|&y| prev_len[y as usize]).sum())
                .collect();
            let next_count: Vec<u64> = images
                .iter()
                .map(|img| {
                    img.iter()
                        .map(|&y| prev_count[y as usize])
                        .fold(0u64, |a, b| a.saturating_add(b))
                })
                .collect();
            let too_big = next_len.iter().any(|g| g.a.abs() > limit || g.b.abs() > limit);
            if too_big || super_len.len() > 90 {
                break;
            }
            super_len.push(next_len);
            super_count.push(next_count);
        }
        let mut max_cell_level = 0;
        while max_cell_level + 1 < super_count.len() && super_count[max_cell_level + 1].iter().sum::<u64>() <= MAX_CELLS
        {
            max_cell_level += 1;
        }

        let (freq, lambda) = perron_frobenius(&images, n);
        let mut s = Substitution {
            names,
            images,
            lengths: lens,
            super_len,
            super_count,
            freq,
            lambda,
            max_cell_level,
            default_tail: Vec::new(),
            canonical: Address::empty(),
        };
        s.default_tail = s.find_tail()?;
        s.canonical = s.find_canonical().canonical();
        Ok(s)
    }

    pub fn images(&self) -> &[Vec<Letter>] {
        &self.images
    }

    pub fn perron_eigenvalue(&self) -> f64 {
        self.lambda
    }

    /// σ^depth(seed).
    pub fn word(&self, seed: Letter, depth: usize) -> Vec<Letter> {
        let mut w = vec![seed];
        for _ in 0..depth {
            w = w
                .iter()
                .flat_map(|&x| self.images[x as usize].iter().copied())
                .collect();
        }
        w
    }

    /// Tile count of σ^k(x), saturating.
    pub fn supertile_count(&self, k: usize, x: Letter) -> u64 {
        self.super_count[k][x as usize]
    }

    pub fn supertile_length(&self, k: usize, x: Letter) -> GoldenNumber {
        self.super_len[k][x as usize]
    }

    /// Per-tile frequencies of legal two-letter words `xy`.
    pub fn pair_frequencies(&self) -> Vec<((Letter, Letter), f64)> {
        let n = self.names.len();
        let mut legal = BTreeSet::new();
        for x in 0..n as Letter {
            for w in self.word(x, 6).windows(2) {
                legal.insert((w[0], w[1]));
            }
        }
        // close under the induced substitution on two-letter words
        loop {
            let mut grown = legal.clone();
            for &(x, y) in &legal {
                grown.extend(self.pair_image(x, y));
            }
            if grown.len() == legal.len() {
                break;
            }
            legal = grown;
        }
        let pairs: Vec<(Letter, Letter)> = legal.into_iter().collect();
        let images: Vec<Vec<usize>> = pairs
            .iter()
            .map(|&(x, y)| {
                self.pair_image(x, y)
                    .iter()
                    .map(|p| pairs.binary_search(p).expect("closed pair set"))
                    .collect()
            })
            .collect();
        let v = perron_vector(&images, pairs.len());
        pairs.into_iter().zip(v).collect()
    }

    /// Two-letter words of `σ(x)` followed by the first letter of `σ(y)`.
    fn pair_image(&self, x: Letter, y: Letter) -> Vec<(Letter, Letter)> {
        let img = &self.images[x as usize];
        let first = self.images[y as usize][0];
        (0..img.len())
            .map(|k| (img[k], img.get(k + 1).copied().unwrap_or(first)))
            .collect()
    }

    fn cell_pairs(&self, level: usize) -> Vec<(u32, u32, f64)> {
        let scale = self.lambda.powi(-(level as i32));
        let mut out = Vec::new();
        for x in 0..self.names.len() as Letter {
            let off = self.cell_offset(level, x);
            let count = self.super_count[level][x as usize];
            for k in 0..count.saturating_sub(1) {
                out.push(((off + k) as u32, (off + k + 1) as u32, self.freq[x as usize] * scale));
            }
        }
        for ((x, y), f) in self.pair_frequencies() {
            let last = self.cell_offset(level, x) + self.super_count[level][x as usize] - 1;
            out.push((last as u32, self.cell_offset(level, y) as u32, f * scale));
        }
        out
    }

    fn nonsingular(&self, tail: &[Step]) -> bool {
        let n = tail.len();
        let mut grows_left = false;
        let mut grows_right = false;
        for k in 0..n {
            let parent = tail[(k + 1) % n].letter;
            let pos = tail[k].pos as usize;
            if pos > 0 {
                grows_left = true;
            }
            if pos + 1 < self.images[parent as usize].len() {
                grows_right = true;
            }
        }
        grows_left && grows_right
    }

    fn legal_cycle(&self, letters: &[Letter]) -> Option<Vec<Step>> {
        let n = letters.len();
        let mut steps = Vec::with_capacity(n);
        for k in 0..n {
            let parent = letters[(k + 1) % n];
            let pos = self.images[parent as usize].iter().position(|&z| z == letters[k])?;
            steps.push(Step {
                letter: letters[k],
                pos: pos as u16,
            });
        }
        Some(steps)
    }

    /// Shortest lexicographically-first nonsingular periodic path.
    fn find_tail(&self) -> Result<Vec<Step>> {
        let n = self.names.len() as Letter;
        for len in 1..=6usize {
            let total = (n as usize).pow(len as u32);
            for code in 0..total {
                let mut c = code;
                let mut letters = vec![0; len];
                for slot in letters.iter_mut().rev() {
                    *slot = (c % n as usize) as Letter;
                    c /= n as usize;
                }
                if let Some(steps) = self.legal_cycle(&letters) {
                    if self.nonsingular(&steps) {
                        return Ok(steps);
                    }
                }
            }
        }
        input("no nonsingular periodic supertile path of length <= 6")
    }

    fn find_canonical(&self) -> Address {
        // a letter that begins its own image gives a right half reading σ^n(seed)
        let seed = (0..self.names.len()).find(|&x| self.images[x][0] as usize == x);
        let first = self.default_tail[0].letter;
        match seed {
            Some(x) if self.images[first as usize][0] as usize == x || x == first as usize => {
                let depth = 24.min(self.super_len.len().saturating_sub(30));
                let mut prefix = vec![
                    Step {
                        letter: x as Letter,
                        pos: 0
                    };
                    depth
                ];
                if let Some(last) = prefix.last_mut() {
                    match self.images[first as usize].iter().position(|&z| z as usize == x) {
                        Some(p) => last.pos = p as u16,
                        None => prefix.clear(),
                    }
                }
                Address {
                    prefix,
                    tail: self.default_tail.clone(),
                }
            }
            _ => Address {
                prefix: Vec::new(),
                tail: self.default_tail.clone(),
            },
        }
    }

    fn parse_token(&self, tok: &str) -> Result<(Letter, Option<u16>)> {
        let (l, p) = match tok.split_once('#') {
            Some((l, p)) => (
                l,
                Some(
                    p.parse::<u16>()
                        .map_err(|_| Error::Input(format!("bad position in {tok:?}")))?,
                ),
            ),
            None => (tok, None),
        };
        let mut cs = l.chars();
        let c = match (cs.next(), cs.next()) {
            (Some(c), None) => c,
            _ => return input(format!("address entries are single letters, got {tok:?}")),
        };
        let x = self
            .names
            .iter()
            .position(|&n| n == c)
            .ok_or_else(|| Error::Input(format!("unknown letter {c:?} in address")))?;
        Ok((x as Letter, p))
    }

    fn resolve(&self, x: Letter, hint: Option<u16>, parent: Letter) -> Result<u16> {
        let img = &self.images[parent as usize];
        let occ: Vec<u16> = img
            .iter()
            .enumerate()
            .filter(|(_, &z)| z == x)
            .map(|(p, _)| p as u16)
            .collect();
        match hint {
            Some(p) if occ.contains(&p) => Ok(p),
            Some(p) => input(format!(
                "{} does not occur at position {p} of the image of {}",
                self.names[x as usize], self.names[parent as usize]
            )),
            None => match occ.len() {
                1 => Ok(occ[0]),
                0 => input(format!(
                    "illegal address: {} is not inside the image of {}",
                    self.names[x as usize], self.names[parent as usize]
                )),
                _ => input(format!(
                    "ambiguous address: write {}#p to pick an occurrence",
                    self.names[x as usize]
                )),
            },
        }
    }

    fn parse_address(&self, prefix: &[String], tail: Option<&[String]>) -> Result<Address> {
        let pre: Vec<(Letter, Option<u16>)> = prefix.iter().map(|t| self.parse_token(t)).collect::<Result<_>>()?;
        let tail_steps = match tail {
            None => self.default_tail.clone(),
            Some([]) => return input("address tail must be nonempty"),
            Some(t) => {
                let parsed: Vec<(Letter, Option<u16>)> =
                    t.iter().map(|x| self.parse_token(x)).collect::<Result<_>>()?;
                let n = parsed.len();
                let mut steps = Vec::with_capacity(n);
                for k in 0..n {
                    let (x, hint) = parsed[k];
                    let parent = parsed[(k + 1) % n].0;
                    steps.push(Step {
                        letter: x,
                        pos: self.resolve(x, hint, parent)?,
                    });
                }
                if !self.nonsingular(&steps) {
                    return input("address tail is singular: supertiles stop growing on one side");
                }
                steps
            }
        };
        let mut steps = Vec::with_capacity(pre.len());
        for k in 0..pre.len() {
            let (x, hint) = pre[k];
            let parent = if k + 1 < pre.len() {
                pre[k + 1].0
            } else {
                tail_steps[0].letter
            };
            steps.push(Step {
                letter: x,
                pos: self.resolve(x, hint, parent)?,
            });
        }
        Ok(Address {
            prefix: steps,
            tail: tail_steps,
        }
        .canonical())
    }

    fn step_tokens(&self, steps: &[Step], after: Option<&Step>) -> Vec<String> {
        steps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let parent = steps.get(k + 1).or(after).map(|p| p.letter);
                let name = self.names[s.letter as usize].to_string();
                let unique =
                    parent.is_some_and(|y| self.images[y as usize].iter().filter(|&&z| z == s.letter).count() == 1);
                if unique {
                    name
                } else {
                    format!("{name}#{}", s.pos)
                }
            })
            .collect()
    }

    /// Length of the children of `parent` (at level k) before position `pos`.
    fn child_offset(&self, k: usize, parent: Letter, pos: u16) -> GoldenNumber {
        self.images[parent as usize][..pos as usize]
            .iter()
            .map(|&y| self.super_len[k][y as usize])
            .sum()
    }

    /// Offset of the origin inside its level-n supertile.
    fn origin_offset(&self, addr: &Address, n: usize) -> GoldenNumber {
        (0..n)
            .map(|j| {
                let s = addr.step(j);
                self.child_offset(j, addr.step(j + 1).letter, s.pos)
            })
            .sum()
    }

    /// Smallest level whose supertile around the origin covers `[lo, hi]`
    /// with unit margin, together with the origin offset at that level.
    fn covering_level(&self, addr: &Address, lo: f64, hi: f64, min_level: usize) -> Result<(usize, GoldenNumber)> {
        if addr.tail.is_empty() {
            return input("substitution points need a nonempty address tail");
        }
        let mut left = GoldenNumber::ZERO;
        let mut k = 0usize;
        loop {
            let x = addr.step(k).letter;
            let right = self.super_len[k][x as usize] - left;
            if k >= min_level && -left.to_f64() < lo - 1.0 && right.to_f64() > hi + 1.0 {
                return Ok((k, left));
            }
            if k + 2 >= self.super_len.len() {
                return Err(Error::Domain(format!(
                    "window [{lo}, {hi}] exceeds the representable supertile range"
                )));
            }
            let s = addr.step(k);
            left += self.child_offset(k, addr.step(k + 1).letter, s.pos);
            k += 1;
        }
    }

    fn cell_offset(&self, level: usize, x: Letter) -> u64 {
        self.super_count[level][..x as usize].iter().sum()
    }

    fn expand(&self, addr: &Address, lo: f64, hi: f64, level: usize) -> Result<Vec<Tile>> {
        let (k, left) = self.covering_level(addr, lo, hi, level)?;
        let mut out = Vec::new();
        let x = addr.step(k).letter;
        self.descend(k, x, -left, lo, hi, level, 0, &mut out);
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        j: usize,
        x: Letter,
        start: GoldenNumber,
        lo: f64,
        hi: f64,
        level: usize,
        cell: u64,
        out: &mut Vec<Tile>,
    ) {
        let cell = if j == level { self.cell_offset(level, x) } else { cell };
        if j == 0 {
            let len = self.lengths[x as usize];
            out.push(Tile {
                start,
                len,
                x: start.to_f64(),
                width: len.to_f64(),
                letter: x,
                cell: cell as u32,
            });
            return;
        }
        let mut s = start;
        let mut index = cell;
        for &y in &self.images[x as usize] {
            let len = self.super_len[j - 1][y as usize];
            let e = s + len;
            if e.to_f64() >= lo && s.to_f64() <= hi {
                self.descend(j - 1, y, s, lo, hi, level, index, out);
            }
            if j <= level {
                index += self.super_count[j - 1][y as usize];
            }
            s = e;
        }
    }

    fn cells(&self, level: usize) -> Vec<CellInfo> {
        let scale = self.lambda.powi(-(level as i32));
        let mut out = Vec::new();
        for x in 0..self.names.len() as Letter {
            let word = self.word(x, level);
            for (idx, &letter) in word.iter().enumerate() {
                let parent = if level == 0 {
                    None
                } else {
                    // locate the tile inside the level-1 children of x
                    let mut rem = idx as u64;
                    let mut found = None;
                    for &y in &self.images[x as usize] {
                        let c = self.super_count[level - 1][y as usize];
                        if rem < c {
                            found = Some((self.cell_offset(level - 1, y) + rem) as u32);
                            break;
                        }
                        rem -= c;
                    }
                    found
                };
                out.push(CellInfo {
                    letter,
                    ancestor: x,
                    index: idx as u64,
                    parent,
                    weight: self.freq[x as usize] * scale,
                });
            }
        }
        out
    }

    fn orbit_displacement(&self, x: &Address, y: &Address) -> Option<GoldenNumber> {
        if x.tail.is_empty() || y.tail.is_empty() {
            return None;
        }
        let n = x.prefix.len().max(y.prefix.len());
        let period = lcm(x.tail.len(), y.tail.len());
        for k in n..n + period {
            if x.step(k) != y.step(k) {
                return None;
            }
        }
        let mut n0 = n;
        while n0 > 0 && x.step(n0 - 1) == y.step(n0 - 1) {
            n0 -= 1;
        }
        Some(self.origin_offset(y, n0) - self.origin_offset(x, n0))
    }

    fn reroot(&self, addr: &Address, p: GoldenNumber) -> Result<Address> {
        let pf = p.to_f64();
        let (k, left) = self.covering_level(addr, pf, pf, 0)?;
        let mut chain = Vec::with_capacity(k);
        let mut x = addr.step(k).letter;
        let mut start = -left;
        for j in (1..=k).rev() {
            let mut s = start;
            let mut next = None;
            for (pos, &y) in self.images[x as usize].iter().enumerate() {
                let e = s + self.super_len[j - 1][y as usize];
                if s <= p && p < e {
                    next = Some((pos as u16, y, s));
                    break;
                }
                s = e;
            }
            let (pos, y, s) = next.expect("point lies inside its covering supertile");
            chain.push(Step { letter: y, pos });
            x = y;
            start = s;
        }
        if start != p {
            return Err(Error::Domain(format!("{p} is not a point of the set")));
        }
        chain.reverse();
        let plen = addr.prefix.len();
        let tlen = addr.tail.len();
        let mut end = k.max(plen);
        while !(end - plen).is_multiple_of(tlen) {
            end += 1;
        }
        chain.extend((k..end).map(|j| addr.step(j)));
        Ok(Address {
            prefix: chain,
            tail: addr.tail.clone(),
        }
        .canonical())
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

fn is_primitive(images: &[Vec<Letter>], n: usize) -> bool {
    // boolean incidence matrix M[x][y] = x occurs in σ(y)
    let mut m = vec![vec![false; n]; n];
    for (y, img) in images.iter().enumerate() {
        for &x in img {
            m[x as usize][y] = true;
        }
    }
    let mut p = m.clone();
    for _ in 0..(n * n + 1) {
        if p.iter().all(|r| r.iter().all(|&v| v)) {
            return true;
        }
        let mut q = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                q[i][j] = (0..n).any(|l| p[i][l] && m[l][j]);
            }
        }
        p = q;
    }
    false
}

fn perron_frobenius(images: &[Vec<Letter>], n: usize) -> (Vec<f64>, f64) {
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 1.0;
    for _ in 0..2000 {
        let mut w = vec![0.0; n];
        for (y, img) in images.iter().enumerate() {
            for &x in img {
                w[x as usize] += v[y];
            }
        }
        let s: f64 = w.iter().sum();
        lambda = s / v.iter().sum::<f64>();
        for x in &mut w {
            *x /= s;
        }
        // average with the previous iterate to damp periodic oscillation
        let done = w.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-17);
        v = w.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        if done {
            break;
        }
    }
    (v, lambda)
}

/// Normalized Perron vector of a primitive substitution on indices.
fn perron_vector(images: &[Vec<usize>], n: usize) -> Vec<f64> {
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..5000 {
        let mut w = vec![0.0; n];
        for (y, img) in images.iter().enumerate() {
            for &x in img {
                w[x] += v[y];
            }
        }
        let s: f64 = w.iter().sum();
        for x in &mut w {
            *x /= s;
        }
        let done = w.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-17);
        v = w.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        if done {
            break;
        }
    }
    v
}

/// Golden cut-and-project set {m + nφ : m + nφ' ∈ [w0, w1)}.
#[derive(Clone, Debug)]
pub struct CutProject {
    w0: GoldenNumber,
    w1: GoldenNumber,
    lengths: Vec<GoldenNumber>,
    freq: Vec<f64>,
}

impl CutProject {
    fn new(window: &[String; 2], slope: &str) -> Result<Self> {
        let w0: GoldenNumber = window[0].parse()?;
        let w1: GoldenNumber = window[1].parse()?;
        if w1 <= w0 {
            return input("cut-and-project window must have positive length");
        }
        if slope.trim() != "phi" {
            return Err(Error::Unsupported(
                "only the golden slope \"phi\" keeps coordinates in Z[phi]".into(),
            ));
        }
        let mut c = CutProject {
            w0,
            w1,
            lengths: Vec::new(),
            freq: Vec::new(),
        };
        let pts = c.points(-20000.0, 20000.0);
        if pts.len() < 3 {
            return input("cut-and-project window too small");
        }
        let gaps: BTreeSet<GoldenNumber> = pts.windows(2).map(|w| w[1] - w[0]).collect();
        c.lengths = gaps.into_iter().rev().collect();
        let mut counts = vec![0usize; c.lengths.len()];
        for w in pts.windows(2) {
            let l = c.lengths.iter().position(|&g| g == w[1] - w[0]).unwrap();
            counts[l] += 1;
        }
        let total = (pts.len() - 1) as f64;
        c.freq = counts.iter().map(|&k| k as f64 / total).collect();
        Ok(c)
    }

    fn contains(&self, p: GoldenNumber) -> bool {
        let s = p.conjugate();
        self.w0 <= s && s < self.w1
    }

    fn points(&self, lo: f64, hi: f64) -> Vec<GoldenNumber> {
        let sqrt5 = 5f64.sqrt();
        let (w0, w1) = (self.w0.to_f64(), self.w1.to_f64());
        let n_lo = ((lo - w1) / sqrt5).floor() as i64 - 1;
        let n_hi = ((hi - w0) / sqrt5).ceil() as i64 + 1;
        let phi = crate::golden::PHI;
        let mut out = Vec::new();
        for n in n_lo..=n_hi {
            let nf = n as f64;
            let m_lo = (lo - nf * phi).max(w0 + nf / phi).floor() as i64 - 1;
            let m_hi = (hi - nf * phi).min(w1 + nf / phi).ceil() as i64 + 1;
            for m in m_lo..=m_hi {
                let p = GoldenNumber::new(m, n);
                let pf = p.to_f64();
                if pf >= lo && pf <= hi && self.contains(p) {
                    out.push(p);
                }
            }
        }
        out.sort();
        out
    }

    fn expand(&self, lo: f64, hi: f64) -> Result<Vec<Tile>> {
        let margin = self.lengths.first().map_or(4.0, |g| g.to_f64() + 1.0);
        let pts = self.points(lo - margin, hi + margin);
        let mut out = Vec::new();
        for w in pts.windows(2) {
            let len = w[1] - w[0];
            let (x, width) = (w[0].to_f64(), len.to_f64());
            if x + width >= lo && x <= hi {
                let letter = self
                    .lengths
                    .iter()
                    .position(|&g| g == len)
                    .ok_or_else(|| Error::Diagnostic("unexpected tile length".into()))?;
                out.push(Tile {
                    start: w[0],
                    len,
                    x,
                    width,
                    letter: letter as Letter,
                    cell: letter as u32,
                });
            }
        }
        Ok(out)
    }
}

/// The lattice spacing·Z.
#[derive(Clone, Debug)]
pub struct Periodic {
    pub spacing: GoldenNumber,
}

impl Periodic {
    fn expand(&self, lo: f64, hi: f64) -> Vec<Tile> {
        let l = self.spacing.to_f64();
        let k0 = (lo / l).floor() as i64 - 1;
        let k1 = (hi / l).ceil() as i64 + 1;
        (k0..=k1)
            .filter_map(|k| {
                let start = self.spacing * k;
                let x = start.to_f64();
                (x + l >= lo && x <= hi).then_some(Tile {
                    start,
                    len: self.spacing,
                    x,
                    width: l,
                    letter: 0,
                    cell: 0,
                })
            })
            .collect()
    }
}

/// A finite patch up to translation, anchored at its least point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cluster {
    Line(Vec<GoldenNumber>),
    Plane(Vec<[GoldenNumber; 2]>),
}

impl Cluster {
    pub fn line(mut pts: Vec<GoldenNumber>) -> Self {
        pts.sort();
        pts.dedup();
        if let Some(&a) = pts.first() {
            for p in &mut pts {
                *p -= a;
            }
        }
        Cluster::Line(pts)
    }

    pub fn plane(mut pts: Vec<[GoldenNumber; 2]>) -> Self {
        pts.sort();
        pts.dedup();
        if let Some(&a) = pts.first() {
            for p in &mut pts {
                p[0] -= a[0];
                p[1] -= a[1];
            }
        }
        Cluster::Plane(pts)
    }

    /// Endpoints of a word of tiles, e.g. "aa" gives {0, φ, 2φ}.
    pub fn from_word(tiling: &Tiling, word: &str) -> Result<Self> {
        let mut pts = vec![GoldenNumber::ZERO];
        let mut x = GoldenNumber::ZERO;
        for c in word.chars() {
            x += tiling.letter_length(tiling.letter_index(c)?);
            pts.push(x);
        }
        Ok(Cluster::line(pts))
    }

    pub fn len(&self) -> usize {
        match self {
            Cluster::Line(p) => p.len(),
            Cluster::Plane(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Extent of a 1D cluster (largest point, since the least is 0).
    pub fn diameter(&self) -> f64 {
        match self {
            Cluster::Line(p) => p.last().map_or(0.0, |g| g.to_f64()),
            Cluster::Plane(p) => {
                let mut d: f64 = 0.0;
                for u in p {
                    for v in p {
                        let dx = (u[0] - v[0]).to_f64();
                        let dy = (u[1] - v[1]).to_f64();
                        d = d.max(dx.hypot(dy));
                    }
                }
                d
            }
        }
    }

    /// CSV rows of exact coordinates plus a float rendering.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self {
            Cluster::Line(p) => {
                s.push_str("a,b,x\n");
                for g in p {
                    s.push_str(&format!("{},{},{:.16e}\n", g.a, g.b, g.to_f64()));
                }
            }
            Cluster::Plane(p) => {
                s.push_str("xa,xb,ya,yb,x,y\n");
                for g in p {
                    s.push_str(&format!(
                        "{},{},{},{},{:.16e},{:.16e}\n",
                        g[0].a,
                        g[0].b,
                        g[1].a,
                        g[1].b,
                        g[0].to_f64(),
                        g[1].to_f64()
                    ));
                }
            }
        }
        s
    }
}

/// σ^depth(seed) for a rule given as letter → image strings.
pub fn build_substitution_word(rule: &BTreeMap<String, String>, seed: char, depth: usize) -> Result<String> {
    let mut map = BTreeMap::new();
    for (k, v) in rule {
        let mut cs = k.chars();
        match (cs.next(), cs.next()) {
            (Some(c), None) => {
                map.insert(c, v.clone());
            }
            _ => return input(format!("rule keys must be single letters, got {k:?}")),
        }
    }
    for v in map.values() {
        if let Some(c) = v.chars().find(|c| !map.contains_key(c)) {
            return input(format!("unknown letter {c:?} in rule image"));
        }
    }
    if !map.contains_key(&seed) {
        return input(format!("unknown seed letter {seed:?}"));
    }
    let mut w = seed.to_string();
    for _ in 0..depth {
        w = w.chars().map(|c| map[&c].as_str()).collect();
    }
    Ok(w)
}

fn line_points(tiling: &Tiling, addr: &Address, lo: f64, hi: f64) -> Result<Vec<GoldenNumber>> {
    tiling.points(addr, lo, hi)
}

/// Points of the reference set inside the closed ball `B_radius(center)`,
/// re-anchored.
pub fn patch(set: &DeloneSet, center: &[f64], radius: f64) -> Result<Cluster> {
    if !(radius > 0.0) {
        return input("patch radius must be positive");
    }
    match set {
        DeloneSet::Line(t) => {
            let c = center[0];
            let pts = line_points(t, &t.canonical_address(), c - radius, c + radius)?;
            Ok(Cluster::line(
                pts.into_iter().filter(|p| (p.to_f64() - c).abs() <= radius).collect(),
            ))
        }
        DeloneSet::Plane(f) => {
            if center.len() != 2 {
                return input("planar patches need a 2-vector center");
            }
            let xs = line_points(&f[0], &f[0].canonical_address(), center[0] - radius, center[0] + radius)?;
            let ys = line_points(&f[1], &f[1].canonical_address(), center[1] - radius, center[1] + radius)?;
            let mut pts = Vec::new();
            for &x in &xs {
                for &y in &ys {
                    let dx = x.to_f64() - center[0];
                    let dy = y.to_f64() - center[1];
                    if dx * dx + dy * dy <= radius * radius {
                        pts.push([x, y]);
                    }
                }
            }
            Ok(Cluster::plane(pts))
        }
    }
}

/// Packing distance r (least gap) and covering radius R observed in the
/// probe window around the origin of the reference set.
pub fn delone_constants(set: &DeloneSet, probe: f64) -> Result<(f64, f64)> {
    match set {
        DeloneSet::Line(t) => line_constants(t, probe),
        DeloneSet::Plane(f) => {
            let (ra, ca) = line_constants(&f[0], probe)?;
            let (rb, cb) = line_constants(&f[1], probe)?;
            Ok((ra.min(rb), ca.hypot(cb)))
        }
    }
}

fn line_constants(t: &Tiling, probe: f64) -> Result<(f64, f64)> {
    let pts = line_points(t, &t.canonical_address(), -probe, probe)?;
    if pts.len() < 2 {
        return input("fewer than two points in the probe window");
    }
    let mut r = GoldenNumber::new(i64::MAX / 4, 0);
    let mut g = GoldenNumber::ZERO;
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        r = r.min(d);
        g = g.max(d);
    }
    Ok((r.to_f64(), g.to_f64() / 2.0))
}

/// Distinct translation classes of `B_R(x) ∩ Λ` for centers `x` in a
/// window `[-scan, scan]`, including the boundary positions where points
/// enter or leave the ball.
pub fn clusters_in_window(t: &Tiling, radius: f64, scan: f64) -> Result<BTreeSet<Cluster>> {
    let pts = line_points(t, &t.canonical_address(), -scan - radius - 1.0, scan + radius + 1.0)?;
    let pf: Vec<f64> = pts.iter().map(|p| p.to_f64()).collect();
    let mut events: Vec<f64> = pf
        .iter()
        .flat_map(|&p| [p - radius, p + radius])
        .filter(|&x| x >= -scan && x <= scan)
        .collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let mut centers = events.clone();
    centers.extend(events.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let mut out = BTreeSet::new();
    for c in centers {
        let lo = pf.partition_point(|&x| x < c - radius - 1e-9);
        let hi = pf.partition_point(|&x| x <= c + radius + 1e-9);
        let inside: Vec<GoldenNumber> = (lo..hi)
            .filter(|&i| (pf[i] - c).abs() <= radius * (1.0 + 1e-15))
            .map(|i| pts[i])
            .collect();
        out.insert(Cluster::line(inside));
    }
    Ok(out)
}

/// FLC witness: the class count at radius `R` once it stops changing as the
/// scan window doubles.
pub fn enumerate_clusters(set: &DeloneSet, radius: f64, max_scan: f64) -> Result<BTreeSet<Cluster>> {
    if !(radius > 0.0) {
        return input("cluster radius must be positive");
    }
    let t = match set {
        DeloneSet::Line(t) => t,
        DeloneSet::Plane(_) => return Err(Error::Unsupported("cluster enumeration is one-dimensional".into())),
    };
    let mut scan = (8.0 * radius).max(16.0);
    let mut prev = clusters_in_window(t, radius, scan)?;
    let mut stable = 0;
    while scan < max_scan {
        scan *= 2.0;
        let next = clusters_in_window(t, radius, scan)?;
        if next.len() == prev.len() {
            stable += 1;
            if stable >= 2 {
                return Ok(next);
            }
        } else {
            stable = 0;
        }
        prev = next;
    }
    Err(Error::Diagnostic(format!(
        "cluster count at radius {radius} did not stabilize up to scan {max_scan}"
    )))
}

/// Translates `t` (returned as the image of the anchor) with `P + t ⊂ Λ`
/// and `P + t` inside `[lo, hi]`.
pub fn occurrences(t: &Tiling, cluster: &Cluster, lo: f64, hi: f64) -> Result<Vec<GoldenNumber>> {
    let pts_c = match cluster {
        Cluster::Line(p) => p,
        Cluster::Plane(_) => return input("planar cluster on a line"),
    };
    if pts_c.is_empty() || hi < lo {
        return Ok(Vec::new());
    }
    let pts = line_points(t, &t.canonical_address(), lo, hi)?;
    let mut out = Vec::new();
    for (i, &p) in pts.iter().enumerate() {
        // the anchor is the least point, so later points follow in order
        let mut j = i;
        let ok = pts_c.iter().all(|&c| {
            let want = p + c;
            while j < pts.len() && pts[j] < want {
                j += 1;
            }
            j < pts.len() && pts[j] == want
        });
        if ok {
            out.push(p);
        }
    }
    Ok(out)
}

/// Scan-window estimate of the repetitivity radius of a 1D cluster: every
/// ball of this radius centered in the window contains a translate.
pub fn repetitivity_radius(set: &DeloneSet, cluster: &Cluster, scan: f64) -> Result<f64> {
    let t = match set {
        DeloneSet::Line(t) => t,
        DeloneSet::Plane(_) => return Err(Error::Unsupported("repetitivity radius is one-dimensional".into())),
    };
    let occ = occurrences(t, cluster, -scan, scan)?;
    if occ.is_empty() {
        return input("cluster does not occur in the scan window");
    }
    let d = cluster.diameter();
    let mut gap = GoldenNumber::ZERO;
    for w in occ.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    Ok(0.5 * (gap.to_f64() + d))
}
