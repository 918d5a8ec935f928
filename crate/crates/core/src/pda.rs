//! Placement delivery arrays: the grid type, the C1/C2 verifier, the
//! Maddah-Ali-Niesen family and the plain-text file format.
//!
//! Coordinates are 0-based everywhere in the API. Anything meant for a human
//! (violation messages, parse errors) is printed 1-based.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

/// One cell of a placement delivery array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entry {
    Star,
    /// A positive color (multicast slot).
    Color(u32),
}

impl Entry {
    pub fn is_star(self) -> bool {
        matches!(self, Entry::Star)
    }

    pub fn color(self) -> Option<u32> {
        match self {
            Entry::Star => None,
            Entry::Color(c) => Some(c),
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Star => f.write_str("*"),
            Entry::Color(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PdaError {
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not a placement delivery array ({} violation(s))", .0.violations.len())]
    Invalid(Box<VerifyReport>),
}

/// A rectangular F×K array of entries, not necessarily a valid PDA.
///
/// Rows are packets, columns are users. Cells are stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<Entry>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, cells: Vec<Entry>) -> Result<Self, PdaError> {
        if rows == 0 || cols == 0 {
            return Err(PdaError::MalformedGrid(format!(
                "grid must be non-empty, got {rows}x{cols}"
            )));
        }
        if cells.len() != rows * cols {
            return Err(PdaError::MalformedGrid(format!(
                "expected {} cells for a {rows}x{cols} grid, got {}",
                rows * cols,
                cells.len()
            )));
        }
        if cells.contains(&Entry::Color(0)) {
            return Err(PdaError::MalformedGrid("colors must be positive".into()));
        }
        Ok(Grid { rows, cols, cells })
    }

    /// Builds a grid from nested rows, rejecting ragged input.
    pub fn from_rows(rows: Vec<Vec<Entry>>) -> Result<Self, PdaError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(PdaError::MalformedGrid(format!(
                "row {} has {} entries, expected {width}",
                i + 1,
                r.len()
            )));
        }
        Grid::new(height, width, rows.into_iter().flatten().collect())
    }

    /// A grid filled with stars.
    pub fn all_stars(rows: usize, cols: usize) -> Result<Self, PdaError> {
        Grid::new(rows, cols, vec![Entry::Star; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Entry {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, entry: Entry) {
        assert!(entry != Entry::Color(0), "colors must be positive");
        self.cells[row * self.cols + col] = entry;
    }

    pub fn cells(&self) -> &[Entry] {
        &self.cells
    }

    pub fn row(&self, row: usize) -> &[Entry] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    pub fn star_count(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, col).is_star()).count()
    }

    /// Number of distinct colors present.
    pub fn distinct_colors(&self) -> usize {
        let mut seen: Vec<u32> = self.cells.iter().filter_map(|e| e.color()).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Renumbers colors 1..S by first occurrence in row-major order.
    pub fn canonicalize(&self) -> Grid {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let cells = self
            .cells
            .iter()
            .map(|e| match *e {
                Entry::Star => Entry::Star,
                Entry::Color(c) => {
                    let next = map.len() as u32 + 1;
                    Entry::Color(*map.entry(c).or_insert(next))
                }
            })
            .collect();
        Grid { rows: self.rows, cols: self.cols, cells }
    }

    pub fn is_canonical(&self) -> bool {
        self.canonicalize() == *self
    }

    /// Rows holding a star, per column.
    pub fn star_pattern(&self) -> Vec<Vec<usize>> {
        (0..self.cols)
            .map(|c| (0..self.rows).filter(|&r| self.get(r, c).is_star()).collect())
            .collect()
    }
}

impl fmt::Display for Grid {
    /// Body lines of the text format, one row per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(Entry::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Parses header-less rows such as `"* 1; 1 *"` (rows split on `;` or newlines).
impl FromStr for Grid {
    type Err = PdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rows = s
            .split([';', '\n'])
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| parse_entry(t).ok_or_else(|| PdaError::MalformedGrid(format!("bad token `{t}`"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Grid::from_rows(rows)
    }
}

fn parse_entry(token: &str) -> Option<Entry> {
    if token == "*" {
        return Some(Entry::Star);
    }
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    match token.parse::<u32>() {
        Ok(0) | Err(_) => None,
        Ok(c) => Some(Entry::Color(c)),
    }
}

/// Which defining condition a violation breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// Every column holds exactly Z stars.
    C1,
    /// Equal integers lie in distinct rows and distinct columns.
    C2a,
    /// The cross cells of an equal-integer pair are stars.
    C2b,
    /// The declared number of integers disagrees with the grid.
    ColorCount,
}

impl Condition {
    pub fn id(self) -> &'static str {
        match self {
            Condition::C1 => "C1",
            Condition::C2a => "C2a",
            Condition::C2b => "C2b",
            Condition::ColorCount => "S",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    StarCount { col: usize, found: usize, expected: usize },
    SharedLine { color: u32, first: (usize, usize), second: (usize, usize) },
    CrossNotStar { color: u32, first: (usize, usize), second: (usize, usize), crosses: Vec<(usize, usize)> },
    ColorCount { declared: usize, found: usize },
}

impl Violation {
    pub fn condition(&self) -> Condition {
        match self {
            Violation::StarCount { .. } => Condition::C1,
            Violation::SharedLine { .. } => Condition::C2a,
            Violation::CrossNotStar { .. } => Condition::C2b,
            Violation::ColorCount { .. } => Condition::ColorCount,
        }
    }

    /// Cells implicated by the violation (0-based `(row, col)`).
    pub fn cells(&self) -> Vec<(usize, usize)> {
        match self {
            Violation::StarCount { .. } | Violation::ColorCount { .. } => Vec::new(),
            Violation::SharedLine { first, second, .. } => vec![*first, *second],
            Violation::CrossNotStar { first, second, crosses, .. } => {
                let mut v = vec![*first, *second];
                v.extend(crosses);
                v
            }
        }
    }
}

fn one_based((r, c): (usize, usize)) -> String {
    format!("({},{})", r + 1, c + 1)
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = self.condition().id();
        match self {
            Violation::StarCount { col, found, expected } => {
                write!(f, "{id}: column {} has {found} stars, expected {expected}", col + 1)
            }
            Violation::SharedLine { color, first, second } => write!(
                f,
                "{id}: color {color} repeats in a shared row/column at {} and {}",
                one_based(*first),
                one_based(*second)
            ),
            Violation::CrossNotStar { color, first, second, crosses } => {
                let crosses: Vec<String> = crosses.iter().map(|c| one_based(*c)).collect();
                write!(
                    f,
                    "{id}: color {color} at {} and {} but cross cell(s) {} are not stars",
                    one_based(*first),
                    one_based(*second),
                    crosses.join(" ")
                )
            }
            Violation::ColorCount { declared, found } => {
                write!(f, "{id}: header declares {declared} integers, grid has {found}")
            }
        }
    }
}

/// Outcome of checking a grid against the PDA definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub k: usize,
    pub f: usize,
    pub z: usize,
    pub s: usize,
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.valid { "valid" } else { "invalid" };
        writeln!(f, "{verdict} ({},{},{},{}) PDA", self.k, self.f, self.z, self.s)?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Verifies a grid, taking Z from the first column.
pub fn verify(grid: &Grid) -> VerifyReport {
    verify_with(grid, None, None)
}

/// Verifies a grid against optionally declared Z and S.
///
/// Cells are bucketed per color so the pair check costs `Σ n_s²`.
pub fn verify_with(grid: &Grid, declared_z: Option<usize>, declared_s: Option<usize>) -> VerifyReport {
    let z = declared_z.unwrap_or_else(|| grid.star_count(0));
    let mut violations = Vec::new();

    for col in 0..grid.cols() {
        let found = grid.star_count(col);
        if found != z {
            violations.push(Violation::StarCount { col, found, expected: z });
        }
    }

    let mut buckets: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if let Entry::Color(s) = grid.get(r, c) {
                buckets.entry(s).or_default().push((r, c));
            }
        }
    }
    let s = buckets.len();
    if let Some(declared) = declared_s {
        if declared != s {
            violations.push(Violation::ColorCount { declared, found: s });
        }
    }

    for (&color, cells) in &buckets {
        for (a, &first) in cells.iter().enumerate() {
            for &second in &cells[a + 1..] {
                let ((r1, c1), (r2, c2)) = (first, second);
                if r1 == r2 || c1 == c2 {
                    violations.push(Violation::SharedLine { color, first, second });
                    continue;
                }
                let crosses: Vec<(usize, usize)> = [(r1, c2), (r2, c1)]
                    .into_iter()
                    .filter(|&(r, c)| !grid.get(r, c).is_star())
                    .collect();
                if !crosses.is_empty() {
                    violations.push(Violation::CrossNotStar { color, first, second, crosses });
                }
            }
        }
    }

    VerifyReport {
        k: grid.cols(),
        f: grid.rows(),
        z,
        s,
        valid: violations.is_empty(),
        violations,
    }
}

/// A verified (K,F,Z,S) placement delivery array in canonical color form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pda {
    grid: Grid,
    z: usize,
    s: usize,
}

impl Pda {
    /// Canonicalizes and verifies `grid`.
    pub fn new(grid: Grid) -> Result<Self, PdaError> {
        let grid = grid.canonicalize();
        let report = verify(&grid);
        if !report.valid {
            return Err(PdaError::Invalid(Box::new(report)));
        }
        Ok(Pda { z: report.z, s: report.s, grid })
    }

    pub fn k(&self) -> usize {
        self.grid.cols()
    }

    pub fn f(&self) -> usize {
        self.grid.rows()
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn get(&self, row: usize, col: usize) -> Entry {
        self.grid.get(row, col)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    pub fn rate(&self) -> Rates {
        rate(self)
    }

    /// Serializes to the text format: header `K F Z S` then F rows.
    pub fn to_text(&self) -> String {
        format_text(&self.grid, self.z, self.s)
    }
}

/// Renders any grid in the text format with the given header values.
pub fn format_text(grid: &Grid, z: usize, s: usize) -> String {
    format!("{} {} {} {}\n{}", grid.cols(), grid.rows(), z, s, grid)
}

/// Exact delivery and memory ratios of a PDA-based scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rates {
    /// S/F
    pub delivery_rate: Ratio<u64>,
    /// Z/F, equal to M/N of the induced caching system
    pub memory_ratio: Ratio<u64>,
}

pub fn rate(p: &Pda) -> Rates {
    let f = p.f() as u64;
    Rates {
        delivery_rate: Ratio::new(p.s() as u64, f),
        memory_ratio: Ratio::new(p.z() as u64, f),
    }
}

/// `(K, M, N)` caching system parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SystemParams {
    pub k_users: usize,
    pub cache_size: usize,
    pub library_size: usize,
}

impl SystemParams {
    pub fn new(k_users: usize, cache_size: usize, library_size: usize) -> Result<Self, PdaError> {
        if k_users == 0 || library_size < k_users || cache_size > library_size {
            return Err(PdaError::InvalidParameter(format!(
                "need N >= K >= 1 and 0 <= M <= N, got K={k_users} M={cache_size} N={library_size}"
            )));
        }
        Ok(SystemParams { k_users, cache_size, library_size })
    }

    /// `t = KM/N` when it is an integer.
    pub fn mn_t(&self) -> Option<usize> {
        let num = self.k_users * self.cache_size;
        (num % self.library_size == 0).then(|| num / self.library_size)
    }
}

/// All `t`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            if n - x < t - cur.len() {
                break;
            }
            cur.push(x);
            go(x + 1, n, t, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, t, &mut Vec::with_capacity(t), &mut out);
    out
}

/// The Maddah-Ali-Niesen PDA with `F = C(K,t)` rows.
///
/// Rows are the `t`-subsets of users in lexicographic order; user `k` has a
/// star in row `T` iff `k ∈ T`, otherwise the cell carries the rank of
/// `T ∪ {k}` among the `(t+1)`-subsets.
pub fn construct_mn_pda(k_users: usize, t: usize) -> Result<Pda, PdaError> {
    if k_users < 2 || t == 0 || t >= k_users {
        return Err(PdaError::InvalidParameter(format!(
            "MN construction needs 1 <= t <= K-1, got K={k_users} t={t}"
        )));
    }
    let rows = subsets(k_users, t);
    let rank: HashMap<Vec<usize>, u32> = subsets(k_users, t + 1)
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i as u32 + 1))
        .collect();
    let mut cells = Vec::with_capacity(rows.len() * k_users);
    for row in &rows {
        for k in 0..k_users {
            if row.contains(&k) {
                cells.push(Entry::Star);
            } else {
                let mut key = row.clone();
                key.push(k);
                key.sort_unstable();
                cells.push(Entry::Color(rank[&key]));
            }
        }
    }
    Pda::new(Grid::new(rows.len(), k_users, cells)?)
}

/// Location of the first offending token in a PDA text file (1-based).
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}, token {token}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub token: usize,
    pub message: String,
}

/// A parsed PDA text file: declared header plus the (canonicalized) grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdaText {
    pub k: usize,
    pub f: usize,
    pub z: usize,
    pub s: usize,
    pub grid: Grid,
}

impl PdaText {
    pub fn verify(&self) -> VerifyReport {
        verify_with(&self.grid, Some(self.z), Some(self.s))
    }

    pub fn into_pda(self) -> Result<Pda, PdaError> {
        let report = self.verify();
        if !report.valid {
            return Err(PdaError::Invalid(Box::new(report)));
        }
        Pda::new(self.grid)
    }
}

/// Parses the PDA text format. K and F must match the body exactly; Z and S
/// mismatches surface later as verifier violations.
pub fn parse_text(input: &str) -> Result<PdaText, ParseError> {
    let err = |line: usize, token: usize, message: String| ParseError { line, token, message };
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = lines.next().ok_or_else(|| err(1, 1, "empty input".into()))?;
    let mut nums = Vec::with_capacity(4);
    for (i, tok) in header.split_whitespace().enumerate() {
        if i >= 4 {
            return Err(err(hline, i + 1, format!("unexpected header token `{tok}`")));
        }
        let v = tok
            .parse::<usize>()
            .ok()
            .filter(|_| tok.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| err(hline, i + 1, format!("expected a non-negative integer, got `{tok}`")))?;
        nums.push(v);
    }
    if nums.len() < 4 {
        return Err(err(hline, nums.len() + 1, "header must be `K F Z S`".into()));
    }
    let (k, f, z, s) = (nums[0], nums[1], nums[2], nums[3]);
    if k == 0 {
        return Err(err(hline, 1, "K must be at least 1".into()));
    }
    if f == 0 {
        return Err(err(hline, 2, "F must be at least 1".into()));
    }
    if z > f {
        return Err(err(hline, 3, format!("Z={z} exceeds F={f}")));
    }

    let mut cells = Vec::with_capacity(k * f);
    for row in 0..f {
        let (ln, text) = lines
            .next()
            .ok_or_else(|| err(hline + row + 1, 1, format!("missing row {} of {f}", row + 1)))?;
        let mut width = 0;
        for (i, tok) in text.split_whitespace().enumerate() {
            if i >= k {
                return Err(err(ln, i + 1, format!("row has more than K={k} entries")));
            }
            let e = parse_entry(tok)
                .ok_or_else(|| err(ln, i + 1, format!("expected `*` or a positive integer, got `{tok}`")))?;
            cells.push(e);
            width += 1;
        }
        if width != k {
            return Err(err(ln, width + 1, format!("row has {width} entries, expected K={k}")));
        }
    }
    for (ln, text) in lines {
        if let Some(tok) = text.split_whitespace().next() {
            return Err(err(ln, 1, format!("trailing content `{tok}`")));
        }
    }

    let grid = Grid::new(f, k, cells)
        .map_err(|e| err(hline, 1, e.to_string()))?
        .canonicalize();
    Ok(PdaText { k, f, z, s, grid })
}

impl FromStr for Pda {
    type Err = PdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_text(s)
            .map_err(|e| PdaError::MalformedGrid(e.to_string()))?
            .into_pda()
    }
}
