//! Data ingestion, comparison extraction, synthetic generators and splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{train_rating_mse, MatrixFactorization, ModelError, ScoreModel, TrainConfig};
use crate::plackett::{laplace_smooth, sample_topk, PlackettError};
use crate::prefcore::{ComparisonTriplet, GroundTruthRanking, ItemId, PrefError, UserId};
use crate::sampler::CandidateFeatures;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("missing column \"{0}\"")]
    MissingColumn(String),
    #[error("row {row}, column \"{column}\": {message}")]
    InvalidCell { row: usize, column: String, message: String },
    #[error("train fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("invalid generator settings: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plackett(#[from] PlackettError),
    #[error(transparent)]
    Pref(#[from] PrefError),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user: UserId,
    pub item: ItemId,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

/// Bijection between original (external) ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    originals: Vec<String>,
    dense: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dense index of `original`, assigning the next free index on first sight.
    pub fn intern(&mut self, original: &str) -> usize {
        if let Some(&d) = self.dense.get(original) {
            return d;
        }
        let d = self.originals.len();
        self.originals.push(original.to_owned());
        self.dense.insert(original.to_owned(), d);
        d
    }

    pub fn dense(&self, original: &str) -> Option<usize> {
        self.dense.get(original).copied()
    }

    pub fn original(&self, dense: usize) -> Option<&str> {
        self.originals.get(dense).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    /// Writes `dense,original` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dense", "original"])?;
        for (d, o) in self.originals.iter().enumerate() {
            w.write_record([d.to_string().as_str(), o])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        self.write_csv(File::create(path).map_err(io_error(path))?)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DatasetError> {
        let mut map = Self::new();
        for (row, rec) in csv::Reader::from_reader(input).records().enumerate() {
            let rec = rec?;
            let dense: usize = rec.get(0).unwrap_or("").parse().map_err(|_| DatasetError::InvalidCell {
                row: row + 1,
                column: "dense".into(),
                message: "not an integer".into(),
            })?;
            let original = rec.get(1).unwrap_or("");
            if dense != map.len() || map.dense.contains_key(original) {
                return Err(DatasetError::InvalidCell {
                    row: row + 1,
                    column: "dense".into(),
                    message: "id table is not a dense bijection".into(),
                });
            }
            map.intern(original);
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::read_csv(File::open(path).map_err(io_error(path))?)
    }
}

/// Ratings with their id lookup tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingData {
    pub ratings: Vec<RatingRecord>,
    pub users: IdMap,
    pub items: IdMap,
}

impl RatingData {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Persists `users.csv` and `items.csv` into `dir`.
    pub fn save_id_maps(&self, dir: &Path) -> Result<(), DatasetError> {
        self.users.save(&dir.join("users.csv"))?;
        self.items.save(&dir.join("items.csv"))
    }
}

/// Parses MovieLens ratings: `user \t item \t rating \t timestamp` (100k) or
/// `user::item::rating::timestamp` (1M). Ids are remapped densely in order of
/// first appearance.
pub fn parse_movielens<R: BufRead>(input: R) -> Result<RatingData, DatasetError> {
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut ratings = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DatasetError::Parse { line: lineno, message: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains("::") { line.split("::").collect() } else { line.split('\t').collect() };
        let parse_err = |message: String| DatasetError::Parse { line: lineno, message };
        if fields.len() < 3 || fields.len() > 4 {
            return Err(parse_err(format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let user = fields[0].trim();
        let item = fields[1].trim();
        if user.parse::<u64>().is_err() || item.parse::<u64>().is_err() {
            return Err(parse_err(format!("ids must be non-negative integers, got \"{user}\", \"{item}\"")));
        }
        let rating: f64 = fields[2].trim().parse().map_err(|_| parse_err(format!("rating \"{}\" is not a number", fields[2])))?;
        if !(1.0..=5.0).contains(&rating) {
            return Err(parse_err(format!("rating {rating} outside the 1-5 scale")));
        }
        let timestamp = match fields.get(3) {
            Some(t) => Some(t.trim().parse::<i64>().map_err(|_| parse_err(format!("timestamp \"{t}\" is not an integer")))?),
            None => None,
        };
        ratings.push(RatingRecord { user: UserId(users.intern(user)), item: ItemId(items.intern(item)), rating, timestamp });
    }
    if ratings.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(RatingData { ratings, users, items })
}

pub fn load_movielens(path: &Path) -> Result<RatingData, DatasetError> {
    parse_movielens(BufReader::new(File::open(path).map_err(io_error(path))?))
}

/// Keeps the `max_users` users with the most ratings and, among their
/// ratings, the `max_items` most-rated items; ids are re-densified.
pub fn subsample_ratings(data: &RatingData, max_users: usize, max_items: usize) -> RatingData {
    let top = |counts: HashMap<usize, usize>, limit: usize| -> HashSet<usize> {
        let mut v: Vec<_> = counts.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().take(limit).map(|(id, _)| id).collect()
    };
    let mut user_counts = HashMap::new();
    for r in &data.ratings {
        *user_counts.entry(r.user.0).or_insert(0) += 1;
    }
    let keep_users = top(user_counts, max_users);
    let mut item_counts = HashMap::new();
    for r in data.ratings.iter().filter(|r| keep_users.contains(&r.user.0)) {
        *item_counts.entry(r.item.0).or_insert(0) += 1;
    }
    let keep_items = top(item_counts, max_items);
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let ratings = data
        .ratings
        .iter()
        .filter(|r| keep_users.contains(&r.user.0) && keep_items.contains(&r.item.0))
        .map(|r| RatingRecord {
            user: UserId(users.intern(data.users.original(r.user.0).unwrap_or_default())),
            item: ItemId(items.intern(data.items.original(r.item.0).unwrap_or_default())),
            ..*r
        })
        .collect();
    RatingData { ratings, users, items }
}

/// For each user, draws `per_user` distinct co-rated item pairs with
/// different ratings, uniformly at random; the higher-rated item wins.
/// Users with fewer such pairs contribute all of them.
pub fn ratings_to_comparisons<R: Rng + ?Sized>(ratings: &[RatingRecord], per_user: usize, rng: &mut R) -> Vec<ComparisonTriplet> {
    let mut by_user: BTreeMap<UserId, Vec<(ItemId, f64)>> = BTreeMap::new();
    for r in ratings {
        by_user.entry(r.user).or_default().push((r.item, r.rating));
    }
    let mut out = Vec::new();
    for (user, mut rated) in by_user {
        rated.sort_by(|a, b| a.0.cmp(&b.0));
        rated.dedup_by_key(|r| r.0);
        let m = rated.len();
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for &(_, r) in &rated {
            *counts.entry(r.to_bits()).or_insert(0) += 1;
        }
        let tied: usize = counts.values().map(|c| c * (c - 1) / 2).sum();
        let valid = m * m.saturating_sub(1) / 2 - tied;
        let to_triplet = |a: usize, b: usize| {
            let (x, y) = (rated[a], rated[b]);
            let (w, l) = if x.1 > y.1 { (x.0, y.0) } else { (y.0, x.0) };
            ComparisonTriplet { user, winner: w, loser: l }
        };
        if per_user == 0 || valid == 0 {
            continue;
        }
        if per_user * 4 < valid {
            let mut seen = HashSet::with_capacity(per_user);
            while seen.len() < per_user {
                let a = rng.random_range(0..m);
                let b = rng.random_range(0..m);
                let key = (a.min(b), a.max(b));
                if a == b || rated[a].1 == rated[b].1 || !seen.insert(key) {
                    continue;
                }
                out.push(to_triplet(key.0, key.1));
            }
        } else {
            let mut pairs = Vec::with_capacity(valid);
            for a in 0..m {
                for b in a + 1..m {
                    if rated[a].1 != rated[b].1 {
                        pairs.push((a, b));
                    }
                }
            }
            let take = per_user.min(pairs.len());
            let (chosen, _) = pairs.partial_shuffle(rng, take);
            out.extend(chosen.iter().map(|&(a, b)| to_triplet(a, b)));
        }
    }
    out
}

/// The seven predictor columns of the admissions schema.
pub const ADMISSIONS_FEATURES: [&str; 7] = ["GRE Score", "TOEFL Score", "University Rating", "SOP", "LOR", "CGPA", "Research"];
pub const ADMISSIONS_SERIAL: &str = "Serial No.";
pub const ADMISSIONS_CHANCE: &str = "Chance of Admit";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionsRecord {
    pub candidate: ItemId,
    pub serial: u64,
    /// Raw predictor values in [`ADMISSIONS_FEATURES`] order.
    pub raw: Vec<f64>,
    /// Min-max normalised predictors in [0, 1].
    pub features: Vec<f64>,
    pub chance_of_admission: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionsData {
    pub records: Vec<AdmissionsRecord>,
    /// Candidates by descending chance, ties by ascending serial number.
    pub truth: GroundTruthRanking,
}

impl AdmissionsData {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn features(&self) -> CandidateFeatures {
        let dim = ADMISSIONS_FEATURES.len();
        let data = self.records.iter().flat_map(|r| r.features.iter().copied()).collect();
        CandidateFeatures::new(self.records.len(), dim, data).expect("normalised features are finite")
    }
}

/// Parses the admissions CSV. Header names are matched after trimming, so
/// the trailing space in the public file's "Chance of Admit " is accepted.
/// Candidates get dense ids in row order.
pub fn parse_admissions<R: Read>(input: R) -> Result<AdmissionsData, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let column = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| DatasetError::MissingColumn(name.to_owned()));
    let serial_col = column(ADMISSIONS_SERIAL)?;
    let chance_col = column(ADMISSIONS_CHANCE)?;
    let feature_cols = ADMISSIONS_FEATURES.iter().map(|n| column(n)).collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let cell = |col: usize| -> Result<f64, DatasetError> {
            let raw = rec.get(col).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DatasetError::InvalidCell {
                row,
                column: headers[col].clone(),
                message: format!("\"{raw}\" is not a number"),
            })
        };
        let serial = cell(serial_col)?;
        if serial < 0.0 || serial.fract() != 0.0 {
            return Err(DatasetError::InvalidCell { row, column: ADMISSIONS_SERIAL.into(), message: format!("{serial} is not a serial number") });
        }
        let chance = cell(chance_col)?;
        if !(0.0..=1.0).contains(&chance) {
            return Err(DatasetError::InvalidCell { row, column: ADMISSIONS_CHANCE.into(), message: format!("{chance} outside [0, 1]") });
        }
        let raw = feature_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>, _>>()?;
        records.push(AdmissionsRecord { candidate: ItemId(records.len()), serial: serial as u64, raw, features: Vec::new(), chance_of_admission: chance });
    }
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }

    for f in 0..ADMISSIONS_FEATURES.len() {
        let (lo, hi) = records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.raw[f]), hi.max(r.raw[f])));
        let span = hi - lo;
        for r in &mut records {
            r.features.push(if span > 0.0 { (r.raw[f] - lo) / span } else { 0.0 });
        }
    }

    let mut order: Vec<&AdmissionsRecord> = records.iter().collect();
    order.sort_by(|a, b| b.chance_of_admission.total_cmp(&a.chance_of_admission).then(a.serial.cmp(&b.serial)));
    let truth = GroundTruthRanking::from_order(order.iter().map(|r| r.candidate).collect())?;
    Ok(AdmissionsData { records, truth })
}

pub fn load_admissions(path: &Path) -> Result<AdmissionsData, DatasetError> {
    parse_admissions(File::open(path).map_err(io_error(path))?)
}

const BUNDLED_ADMISSIONS: &str = include_str!("../data/admissions_surrogate.csv");

/// The bundled 100-candidate synthetic surrogate of the admissions data.
pub fn bundled_admissions() -> AdmissionsData {
    parse_admissions(BUNDLED_ADMISSIONS.as_bytes()).expect("bundled admissions CSV is valid")
}

/// Raw text of the bundled surrogate CSV.
pub fn bundled_admissions_csv() -> &'static str {
    BUNDLED_ADMISSIONS
}

/// Generates admissions-schema rows: a latent aptitude drives every
/// predictor, and the chance of admission is a noisy linear function of the
/// standardised predictors, rounded to two decimals like the public data.
pub fn synthetic_admissions_csv(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("Serial No.,GRE Score,TOEFL Score,University Rating,SOP,LOR ,CGPA,Research,Chance of Admit \n");
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    for serial in 1..=n {
        let a = gauss();
        let gre = (316.0 + 10.0 * a + 5.0 * gauss()).round().clamp(290.0, 340.0);
        let toefl = (107.0 + 5.0 * a + 3.0 * gauss()).round().clamp(92.0, 120.0);
        let univ = (3.0 + 0.9 * a + 0.7 * gauss()).round().clamp(1.0, 5.0);
        let half = |x: f64| ((x * 2.0).round() / 2.0).clamp(1.0, 5.0);
        let sop = half(3.4 + 0.7 * a + 0.6 * gauss());
        let lor = half(3.5 + 0.6 * a + 0.6 * gauss());
        let cgpa = ((8.6 + 0.5 * a + 0.3 * gauss()) * 100.0).round() / 100.0;
        let cgpa = cgpa.clamp(6.8, 9.92);
        let research = if a + 0.8 * gauss() > -0.2 { 1.0 } else { 0.0 };
        let z = 0.25 * (gre - 316.0) / 11.0
            + 0.2 * (toefl - 107.0) / 6.0
            + 0.1 * (univ - 3.0) / 1.1
            + 0.05 * (sop - 3.4)
            + 0.1 * (lor - 3.5)
            + 0.45 * (cgpa - 8.6) / 0.6
            + 0.05 * (research - 0.5);
        let chance = ((0.72 + 0.12 * z + 0.03 * gauss()).clamp(0.34, 0.97) * 100.0).round() / 100.0;
        out.push_str(&format!("{serial},{gre},{toefl},{univ},{sop},{lor},{cgpa:.2},{research},{chance:.2}\n"));
    }
    out
}

/// Settings for [`synthetic_ratings`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticRatingsConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Rank of the user-item interaction term.
    pub rank: usize,
    /// Fraction of user-item pairs that carry a rating.
    pub density: f64,
    /// Noise standard deviation before rounding to the 1-5 scale.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticRatingsConfig {
    fn default() -> Self {
        Self { n_users: 30, n_items: 40, rank: 3, density: 0.5, noise: 0.5, seed: 0 }
    }
}

/// Integer 1-5 ratings from `3.5 + b_u + c_i + x_u . y_i + noise`.
/// Every user rates at least two items.
pub fn synthetic_ratings(cfg: &SyntheticRatingsConfig) -> Result<RatingData, DatasetError> {
    if cfg.n_users == 0 || cfg.n_items < 2 || cfg.rank == 0 || !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(DatasetError::InvalidConfig(format!("{cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |std: f64| Normal::new(0.0, std).expect("finite std");
    let factor_std = (0.8 / cfg.rank as f64).sqrt();
    let x: Vec<f64> = (0..cfg.n_users * cfg.rank).map(|_| normal(factor_std).sample(&mut rng)).collect();
    let y: Vec<f64> = (0..cfg.n_items * cfg.rank).map(|_| normal(1.0).sample(&mut rng)).collect();
    let bu: Vec<f64> = (0..cfg.n_users).map(|_| normal(0.3).sample(&mut rng)).collect();
    let ci: Vec<f64> = (0..cfg.n_items).map(|_| normal(0.6).sample(&mut rng)).collect();
    let per_user = ((cfg.density * cfg.n_items as f64).round() as usize).clamp(2, cfg.n_items);
    let mut ratings = Vec::new();
    for u in 0..cfg.n_users {
        let mut chosen: Vec<usize> = index::sample(&mut rng, cfg.n_items, per_user).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            let dot: f64 = (0..cfg.rank).map(|f| x[u * cfg.rank + f] * y[i * cfg.rank + f]).sum();
            let noise = normal(cfg.noise.max(1e-12)).sample(&mut rng);
            let r = (3.5 + bu[u] + ci[i] + dot + noise).round().clamp(1.0, 5.0);
            ratings.push(RatingRecord { user: UserId(u), item: ItemId(i), rating: r, timestamp: None });
        }
    }
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    (0..cfg.n_users).for_each(|u| {
        users.intern(&u.to_string());
    });
    (0..cfg.n_items).for_each(|i| {
        items.intern(&i.to_string());
    });
    Ok(RatingData { ratings, users, items })
}

/// Dense synthetic ratings `r_ui = dot(U_u, V_i)` from a factorisation fitted to all ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowModel {
    pub factors: MatrixFactorization,
}

impl ShadowModel {
    pub fn shadow_rating(&self, user: UserId, item: ItemId) -> f64 {
        self.factors.score(user, item)
    }

    pub fn shadow_ratings(&self, user: UserId) -> Vec<f64> {
        (0..self.factors.n_items()).map(|i| self.factors.score(user, ItemId(i))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowConfig {
    pub latent_dim: usize,
    /// Laplace smoothing constant applied to the ranking weights.
    pub alpha: f64,
    pub train: TrainConfig,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        Self {
            latent_dim: 4,
            alpha: crate::plackett::DEFAULT_ALPHA,
            train: TrainConfig { learning_rate: 0.02, epochs: 200, l2_lambda: 0.02, init_std: Some(0.3), ..TrainConfig::default() },
        }
    }
}

/// `exp` of per-user standardised shadow ratings; all ones when the ratings are constant.
pub fn shadow_weights(shadow: &[f64]) -> Vec<f64> {
    let n = shadow.len() as f64;
    let mean = shadow.iter().sum::<f64>() / n;
    let std = (shadow.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std <= 1e-12 || !std.is_finite() {
        return vec![1.0; shadow.len()];
    }
    shadow.iter().map(|r| ((r - mean) / std).exp()).collect()
}

/// Draws one full ranking from Laplace-smoothed weights.
pub fn sample_truth_ranking<R: Rng + ?Sized>(weights: &[f64], alpha: f64, rng: &mut R) -> Result<GroundTruthRanking, DatasetError> {
    let scores = laplace_smooth(weights, alpha)?.to_scores()?;
    let ranking = sample_topk(&scores, weights.len(), rng)?;
    Ok(GroundTruthRanking::from_order(ranking.ordered().to_vec())?)
}

/// Fits the shadow model on every rating, then samples one ground-truth
/// permutation per user from its smoothed shadow weights.
pub fn build_shadow_truth<R: Rng + ?Sized>(
    ratings: &[RatingRecord],
    n_users: usize,
    n_items: usize,
    cfg: &ShadowConfig,
    rng: &mut R,
) -> Result<(ShadowModel, Vec<GroundTruthRanking>), DatasetError> {
    if cfg.latent_dim == 0 {
        return Err(DatasetError::InvalidConfig("latent_dim must be at least 1".into()));
    }
    let mut factors = MatrixFactorization::from_config(n_users, n_items, cfg.latent_dim, &cfg.train);
    train_rating_mse(&mut factors, ratings, &cfg.train)?;
    let shadow = ShadowModel { factors };
    let truths = (0..n_users)
        .map(|u| sample_truth_ranking(&shadow_weights(&shadow.shadow_ratings(UserId(u))), cfg.alpha, rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((shadow, truths))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Seeded uniform partition into `round(fraction * n)` training records (at
/// least one when data is nonempty) and the rest. Both halves keep the input order.
pub fn split<T: Clone>(data: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>), DatasetError> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(DatasetError::InvalidFraction(f));
    }
    let n = data.len();
    let n_train = ((f * n as f64).round() as usize).clamp(n.min(1), n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_train = vec![false; n];
    for idx in index::sample(&mut rng, n, n_train) {
        in_train[idx] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (x, keep) in data.iter().zip(in_train) {
        if keep {
            train.push(x.clone());
        } else {
            test.push(x.clone());
        }
    }
    Ok((train, test))
}

/// Per-user item holdout: `test_per_user` items drawn for each user,
/// returned sorted.
pub fn holdout_items(n_users: usize, n_items: usize, test_per_user: usize, seed: u64) -> Result<Vec<Vec<ItemId>>, DatasetError> {
    if test_per_user < 2 || test_per_user > n_items {
        return Err(DatasetError::InvalidConfig(format!("test_per_user must lie in [2, {n_items}], got {test_per_user}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_users)
        .map(|_| {
            let mut v: Vec<ItemId> = index::sample(&mut rng, n_items, test_per_user).into_iter().map(ItemId).collect();
            v.sort();
            v
        })
        .collect())
}
