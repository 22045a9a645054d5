//! Rating-data ingestion, the fixed item catalog, and consumer initialization.
//!
//! Ratings come from a MovieLens-format CSV (`userId,movieId,rating,timestamp`
//! by default; a [`ColumnSchema`] tolerates other headers). External ids are
//! re-indexed to dense internal ids: consumers cover `0..C-1` and items cover
//! `0..M-1`, both assigned by ascending external id. The store is append-only
//! during a run; the catalog (item count, profits, id maps) is fixed for the
//! whole run.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};

/// One numeric rating. `timestamp` is ignored by the model but preserved for
/// provenance; in-run feedback stores the step index there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingRecord {
    pub consumer: u32,
    pub item: u32,
    pub rating: f32,
    pub timestamp: i64,
}

/// Sparse consumer-by-item feedback, append-only during a run.
#[derive(Debug, Clone)]
pub struct RatingStore {
    consumer_count: usize,
    item_count: usize,
    records: Vec<RatingRecord>,
    /// consumer -> indices into `records`
    by_consumer: Vec<Vec<u32>>,
    /// item -> number of ratings received (live popularity counts)
    item_rating_counts: Vec<u32>,
    /// (consumer << 32 | item) pairs already present
    rated_pairs: std::collections::HashSet<u64>,
}

impl RatingStore {
    fn new(consumer_count: usize, item_count: usize) -> Self {
        RatingStore {
            consumer_count,
            item_count,
            records: Vec::new(),
            by_consumer: vec![Vec::new(); consumer_count],
            item_rating_counts: vec![0; item_count],
            rated_pairs: std::collections::HashSet::new(),
        }
    }

    /// Builds a store from explicit records (dense ids assumed).
    pub fn from_records(
        consumer_count: usize,
        item_count: usize,
        records: impl IntoIterator<Item = RatingRecord>,
    ) -> Result<Self> {
        let mut store = RatingStore::new(consumer_count, item_count);
        for record in records {
            store.append(record)?;
        }
        Ok(store)
    }

    pub fn consumer_count(&self) -> usize {
        self.consumer_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn ratings_of(&self, consumer: u32) -> impl Iterator<Item = &RatingRecord> + '_ {
        self.by_consumer[consumer as usize]
            .iter()
            .map(move |&idx| &self.records[idx as usize])
    }

    pub fn rating_count_of(&self, consumer: u32) -> usize {
        self.by_consumer[consumer as usize].len()
    }

    /// Live per-item rating counts (initial data plus in-run feedback).
    pub fn item_counts(&self) -> &[u32] {
        &self.item_rating_counts
    }

    pub fn contains(&self, consumer: u32, item: u32) -> bool {
        self.rated_pairs.contains(&pair_key(consumer, item))
    }

    /// Appends one rating. The (consumer, item) pair must be new and the
    /// rating in [0,5]; both hold by construction during a run, so a violation
    /// signals a corrupt store.
    pub fn append(&mut self, record: RatingRecord) -> Result<()> {
        if record.consumer as usize >= self.consumer_count
            || record.item as usize >= self.item_count
        {
            return Err(SimError::Internal(format!(
                "rating ({}, {}) outside store bounds {}x{}",
                record.consumer, record.item, self.consumer_count, self.item_count
            )));
        }
        if !(0.0..=5.0).contains(&record.rating) {
            return Err(SimError::validation(format!(
                "rating {} for consumer {} item {} outside [0,5]",
                record.rating, record.consumer, record.item
            )));
        }
        if !self.rated_pairs.insert(pair_key(record.consumer, record.item)) {
            return Err(SimError::validation(format!(
                "duplicate rating for (consumer {}, item {})",
                record.consumer, record.item
            )));
        }
        self.by_consumer[record.consumer as usize].push(self.records.len() as u32);
        self.item_rating_counts[record.item as usize] += 1;
        self.records.push(record);
        Ok(())
    }
}

fn pair_key(consumer: u32, item: u32) -> u64 {
    ((consumer as u64) << 32) | item as u64
}

/// Maps which CSV columns hold which fields. Defaults to the
/// `userId,movieId,rating,timestamp` layout.
#[derive(Debug, Clone)]
pub struct ColumnSchema {
    pub user: String,
    pub item: String,
    pub rating: String,
    /// `None` tolerates files without a timestamp column.
    pub timestamp: Option<String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            user: "userId".into(),
            item: "movieId".into(),
            rating: "rating".into(),
            timestamp: Some("timestamp".into()),
        }
    }
}

/// Bidirectional map between sparse external ids and dense internal indices.
#[derive(Debug, Clone)]
pub struct IdMap {
    to_external: Vec<u64>,
    to_internal: HashMap<u64, u32>,
}

impl IdMap {
    /// Builds a map from external ids; they must be strictly ascending so the
    /// dense index assignment is unambiguous.
    pub fn from_external_ids(ids: Vec<u64>) -> Result<Self> {
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::validation(
                "external ids must be strictly ascending",
            ));
        }
        Ok(IdMap::from_sorted(ids))
    }

    fn from_sorted(sorted: Vec<u64>) -> Self {
        let to_internal = sorted
            .iter()
            .enumerate()
            .map(|(idx, &ext)| (ext, idx as u32))
            .collect();
        IdMap {
            to_external: sorted,
            to_internal,
        }
    }

    pub fn len(&self) -> usize {
        self.to_external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_external.is_empty()
    }

    pub fn external(&self, internal: u32) -> u64 {
        self.to_external[internal as usize]
    }

    pub fn internal(&self, external: u64) -> Option<u32> {
        self.to_internal.get(&external).copied()
    }
}

/// The result of loading a ratings file: the store plus the id maps needed to
/// report or re-export external ids.
#[derive(Debug, Clone)]
pub struct Ingest {
    pub store: RatingStore,
    pub consumer_ids: IdMap,
    pub item_ids: IdMap,
}

/// Loads a MovieLens-format ratings CSV and re-indexes ids densely.
pub fn load_ratings(path: &Path, schema: &ColumnSchema) -> Result<Ingest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                SimError::io(path, std::io::Error::other(e.to_string()))
            }
            _ => SimError::Parse {
                path: path.into(),
                line: 1,
                message: e.to_string(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| SimError::Parse {
            path: path.into(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            SimError::Parse {
                path: path.into(),
                line: 1,
                message: format!("missing column `{name}` in header [{}]", headers.iter().collect::<Vec<_>>().join(", ")),
            }
        })
    };
    let user_col = col(&schema.user)?;
    let item_col = col(&schema.item)?;
    let rating_col = col(&schema.rating)?;
    let ts_col = match &schema.timestamp {
        Some(name) => Some(col(name)?),
        None => None,
    };

    struct RawRow {
        user: u64,
        item: u64,
        rating: f32,
        timestamp: i64,
    }

    let mut rows: Vec<RawRow> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| SimError::Parse {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |field: &str, value: &str| SimError::Parse {
            path: path.into(),
            line,
            message: format!("cannot parse {field} from `{value}`"),
        };
        let field = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).ok_or_else(|| SimError::Parse {
                path: path.into(),
                line,
                message: format!("row has no {name} column"),
            })
        };
        let user_s = field(user_col, "user")?;
        let user = user_s.parse::<u64>().map_err(|_| parse_err("user id", user_s))?;
        let item_s = field(item_col, "item")?;
        let item = item_s.parse::<u64>().map_err(|_| parse_err("item id", item_s))?;
        let rating_s = field(rating_col, "rating")?;
        let rating = rating_s
            .parse::<f32>()
            .map_err(|_| parse_err("rating", rating_s))?;
        if !rating.is_finite() || !(0.0..=5.0).contains(&rating) {
            return Err(SimError::validation(format!(
                "{}:{line}: rating {rating_s} outside [0,5]",
                path.display()
            )));
        }
        let timestamp = match ts_col {
            Some(idx) => {
                let s = field(idx, "timestamp")?;
                s.parse::<i64>().map_err(|_| parse_err("timestamp", s))?
            }
            None => 0,
        };
        rows.push(RawRow {
            user,
            item,
            rating,
            timestamp,
        });
    }

    if rows.is_empty() {
        return Err(SimError::validation(format!(
            "{}: no rating rows",
            path.display()
        )));
    }

    let mut users: Vec<u64> = rows.iter().map(|r| r.user).collect();
    users.sort_unstable();
    users.dedup();
    let mut items: Vec<u64> = rows.iter().map(|r| r.item).collect();
    items.sort_unstable();
    items.dedup();
    let consumer_ids = IdMap::from_sorted(users);
    let item_ids = IdMap::from_sorted(items);

    let mut store = RatingStore::new(consumer_ids.len(), item_ids.len());
    for row in &rows {
        let consumer = consumer_ids.internal(row.user).expect("id just indexed");
        let item = item_ids.internal(row.item).expect("id just indexed");
        store
            .append(RatingRecord {
                consumer,
                item,
                rating: row.rating,
                timestamp: row.timestamp,
            })
            .map_err(|e| match e {
                SimError::Validation(msg) => SimError::validation(format!(
                    "{}: {msg} (external user {}, item {})",
                    path.display(),
                    row.user,
                    row.item
                )),
                other => other,
            })?;
    }

    log::info!(
        "loaded {}: {} consumers, {} items, {} ratings",
        path.display(),
        store.consumer_count(),
        store.item_count(),
        store.len()
    );

    Ok(Ingest {
        store,
        consumer_ids,
        item_ids,
    })
}

/// Fixed set of items offered for the whole run: profits plus the id map.
#[derive(Debug, Clone)]
pub struct ItemCatalog {
    profits: Vec<f64>,
    id_map: IdMap,
}

impl ItemCatalog {
    pub fn new(profits: Vec<f64>, id_map: IdMap) -> Result<Self> {
        if profits.len() != id_map.len() {
            return Err(SimError::validation(format!(
                "profit map has {} entries for {} items",
                profits.len(),
                id_map.len()
            )));
        }
        if let Some(p) = profits.iter().find(|p| !(0.0..=5.0).contains(*p)) {
            return Err(SimError::validation(format!("profit {p} outside [0,5]")));
        }
        Ok(ItemCatalog { profits, id_map })
    }

    pub fn item_count(&self) -> usize {
        self.profits.len()
    }

    pub fn profit(&self, item: u32) -> f64 {
        self.profits[item as usize]
    }

    pub fn profits(&self) -> &[f64] {
        &self.profits
    }

    pub fn id_map(&self) -> &IdMap {
        &self.id_map
    }

    /// Serializes the profit map as `item_id,profit` (external ids) so a
    /// fixed draw can be pinned across experiments.
    pub fn profits_csv(&self) -> String {
        let mut out = String::from("item_id,profit\n");
        for (internal, profit) in self.profits.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.id_map.external(internal as u32), profit);
        }
        out
    }

    /// Parses a profit CSV written by [`ItemCatalog::profits_csv`]. Every item
    /// in `id_map` must be covered and no unknown ids are allowed.
    pub fn from_profits_csv(text: &str, id_map: IdMap) -> Result<Self> {
        let mut profits = vec![f64::NAN; id_map.len()];
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "item_id,profit" => {}
            _ => return Err(SimError::validation("profit CSV must start with `item_id,profit`")),
        }
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (id_s, profit_s) = line.split_once(',').ok_or_else(|| {
                SimError::validation(format!("profit CSV line {}: expected `item_id,profit`", lineno + 1))
            })?;
            let external: u64 = id_s.trim().parse().map_err(|_| {
                SimError::validation(format!("profit CSV line {}: bad item id `{id_s}`", lineno + 1))
            })?;
            let profit: f64 = profit_s.trim().parse().map_err(|_| {
                SimError::validation(format!("profit CSV line {}: bad profit `{profit_s}`", lineno + 1))
            })?;
            let internal = id_map.internal(external).ok_or_else(|| {
                SimError::validation(format!("profit CSV line {}: unknown item id {external}", lineno + 1))
            })?;
            if !profits[internal as usize].is_nan() {
                return Err(SimError::validation(format!(
                    "profit CSV line {}: duplicate item id {external}",
                    lineno + 1
                )));
            }
            profits[internal as usize] = profit;
        }
        if let Some(missing) = profits.iter().position(|p| p.is_nan()) {
            return Err(SimError::validation(format!(
                "profit CSV covers {} of {} items (first missing: external id {})",
                profits.iter().filter(|p| !p.is_nan()).count(),
                id_map.len(),
                id_map.external(missing as u32)
            )));
        }
        ItemCatalog::new(profits, id_map)
    }
}

const PROFIT_RETRY_CAP: usize = 10_000;

/// Draws per-item profits from N(2.5, 1) bounded to [0,5] by rejection
/// sampling (redraws, not clamping, so no probability mass piles up at the
/// bounds). Deterministic given the rng state.
pub fn sample_profits<R: Rng>(item_count: usize, rng: &mut R) -> Result<Vec<f64>> {
    let normal = Normal::new(2.5, 1.0).expect("valid parameters");
    let mut profits = Vec::with_capacity(item_count);
    for item in 0..item_count {
        let mut accepted = None;
        for _ in 0..PROFIT_RETRY_CAP {
            let draw = normal.sample(rng);
            if (0.0..=5.0).contains(&draw) {
                accepted = Some(draw);
                break;
            }
        }
        match accepted {
            Some(p) => profits.push(p),
            None => {
                return Err(SimError::Internal(format!(
                    "profit rejection sampling exhausted {PROFIT_RETRY_CAP} retries for item {item}"
                )))
            }
        }
    }
    Ok(profits)
}

/// Initial consumer state derived from the dataset: experience counters and
/// the dataset-mean threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerInit {
    pub alpha0: f64,
    pub beta0: f64,
    pub threshold0: f64,
    pub rated_items: Vec<u32>,
}

impl ConsumerInit {
    pub fn trust0(&self) -> f64 {
        self.alpha0 / (self.alpha0 + self.beta0)
    }
}

/// Builds the initial experience counters for one consumer: the threshold is
/// the mean of their initial ratings, `alpha0` counts ratings at or above it
/// (boundary ratings are positive experiences), `beta0` the rest.
pub fn init_consumer(store: &RatingStore, consumer: u32) -> Result<ConsumerInit> {
    let count = store.rating_count_of(consumer);
    if count == 0 {
        return Err(SimError::validation(format!(
            "consumer {consumer} has no initial ratings; store is corrupt"
        )));
    }
    let sum: f64 = store.ratings_of(consumer).map(|r| r.rating as f64).sum();
    let threshold0 = sum / count as f64;
    let mut alpha0 = 0.0;
    let mut beta0 = 0.0;
    let mut rated_items = Vec::with_capacity(count);
    for record in store.ratings_of(consumer) {
        if record.rating as f64 >= threshold0 {
            alpha0 += 1.0;
        } else {
            beta0 += 1.0;
        }
        rated_items.push(record.item);
    }
    Ok(ConsumerInit {
        alpha0,
        beta0,
        threshold0,
        rated_items,
    })
}

/// Restricts an ingest to its first `consumer_limit` consumers (by dense id)
/// and re-indexes items densely over the surviving records. Used by the CLI's
/// quick mode; the result is not a reproduction dataset.
pub fn subsample_consumers(ingest: &Ingest, consumer_limit: usize) -> Result<Ingest> {
    if consumer_limit == 0 {
        return Err(SimError::validation("quick mode needs at least 1 consumer"));
    }
    let keep = consumer_limit.min(ingest.store.consumer_count());
    let mut kept_items: Vec<u64> = ingest
        .store
        .records()
        .iter()
        .filter(|r| (r.consumer as usize) < keep)
        .map(|r| ingest.item_ids.external(r.item))
        .collect();
    kept_items.sort_unstable();
    kept_items.dedup();
    let item_ids = IdMap::from_sorted(kept_items);
    let consumer_ids = IdMap::from_sorted(
        (0..keep as u32).map(|c| ingest.consumer_ids.external(c)).collect(),
    );
    let mut store = RatingStore::new(keep, item_ids.len());
    for record in ingest.store.records() {
        if (record.consumer as usize) < keep {
            let item = item_ids
                .internal(ingest.item_ids.external(record.item))
                .expect("item indexed above");
            store.append(RatingRecord { item, ..*record })?;
        }
    }
    Ok(Ingest {
        store,
        consumer_ids,
        item_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_single_record() {
        let f = write_csv("userId,movieId,rating,timestamp\n1,10,4.0,999\n");
        let ingest = load_ratings(f.path(), &ColumnSchema::default()).unwrap();
        assert_eq!(ingest.store.len(), 1);
        assert_eq!(ingest.store.consumer_count(), 1);
        assert_eq!(ingest.store.item_count(), 1);
        assert_eq!(ingest.store.item_counts(), &[1]);
        let rec = &ingest.store.records()[0];
        assert_eq!((rec.consumer, rec.item, rec.rating), (0, 0, 4.0));
        assert_eq!(ingest.consumer_ids.external(0), 1);
        assert_eq!(ingest.item_ids.external(0), 10);
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        let f = write_csv("userId,movieId,rating,timestamp\n1,10,4.0,1\n1,10,3.0,2\n");
        let err = load_ratings(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let f = write_csv("userId,movieId,rating,timestamp\n1,10,4.0,1\n2,oops,3.0,2\n");
        let err = load_ratings(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(err.to_string().contains(":3"), "{err}");
    }

    #[test]
    fn out_of_range_rating_is_rejected() {
        let f = write_csv("userId,movieId,rating,timestamp\n1,10,5.5,1\n");
        let err = load_ratings(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(err.to_string().contains("outside [0,5]"), "{err}");
    }

    #[test]
    fn empty_file_is_rejected() {
        let f = write_csv("userId,movieId,rating,timestamp\n");
        let err = load_ratings(f.path(), &ColumnSchema::default()).unwrap_err();
        assert!(err.to_string().contains("no rating rows"), "{err}");
    }

    #[test]
    fn ids_are_dense_and_sorted() {
        let f = write_csv(
            "userId,movieId,rating,timestamp\n9,100,4.0,1\n2,7,3.0,2\n9,7,2.0,3\n",
        );
        let ingest = load_ratings(f.path(), &ColumnSchema::default()).unwrap();
        assert_eq!(ingest.store.consumer_count(), 2);
        assert_eq!(ingest.store.item_count(), 2);
        // external ids sorted ascending -> dense rank
        assert_eq!(ingest.consumer_ids.external(0), 2);
        assert_eq!(ingest.consumer_ids.external(1), 9);
        assert_eq!(ingest.item_ids.external(0), 7);
        assert_eq!(ingest.item_ids.external(1), 100);
        assert_eq!(ingest.item_ids.internal(100), Some(1));
    }

    #[test]
    fn reload_is_byte_stable() {
        let f = write_csv(
            "userId,movieId,rating,timestamp\n3,5,2.5,10\n1,5,4.5,20\n1,9,1.0,30\n",
        );
        let a = load_ratings(f.path(), &ColumnSchema::default()).unwrap();
        let b = load_ratings(f.path(), &ColumnSchema::default()).unwrap();
        assert_eq!(a.store.records(), b.store.records());
        assert_eq!(a.store.item_counts(), b.store.item_counts());
    }

    #[test]
    fn custom_schema_without_timestamp() {
        let f = write_csv("user,item,score\n4,8,3.0\n");
        let schema = ColumnSchema {
            user: "user".into(),
            item: "item".into(),
            rating: "score".into(),
            timestamp: None,
        };
        let ingest = load_ratings(f.path(), &schema).unwrap();
        assert_eq!(ingest.store.records()[0].timestamp, 0);
    }

    #[test]
    fn profits_respect_bounds_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let profits = sample_profits(10_000, &mut rng).unwrap();
        assert!(profits.iter().all(|p| (0.0..=5.0).contains(p)));
        let mean = profits.iter().sum::<f64>() / profits.len() as f64;
        // truncated N(2.5,1) on [0,5] is symmetric around 2.5
        assert!((2.4..=2.6).contains(&mean), "mean {mean}");
    }

    #[test]
    fn profits_deterministic_per_seed() {
        let a = sample_profits(100, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_profits(100, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let single = sample_profits(1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!((0.0..=5.0).contains(&single[0]));
    }

    #[test]
    fn init_consumer_examples() {
        let f = write_csv(
            "userId,movieId,rating,timestamp\n1,1,5.0,0\n1,2,4.0,0\n1,3,1.0,0\n2,1,3.0,0\n2,2,3.0,0\n2,3,3.0,0\n",
        );
        let ingest = load_ratings(f.path(), &ColumnSchema::default()).unwrap();
        let a = init_consumer(&ingest.store, 0).unwrap();
        assert!((a.threshold0 - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!((a.alpha0, a.beta0), (2.0, 1.0));
        assert!((a.trust0() - 2.0 / 3.0).abs() < 1e-12);
        // tie case: rating == threshold counts as a positive experience
        let b = init_consumer(&ingest.store, 1).unwrap();
        assert_eq!((b.alpha0, b.beta0), (3.0, 0.0));
        assert_eq!(b.trust0(), 1.0);
    }

    #[test]
    fn init_consumer_rejects_empty() {
        let store = RatingStore::new(1, 1);
        assert!(init_consumer(&store, 0).is_err());
    }

    #[test]
    fn profit_csv_round_trip() {
        let id_map = IdMap::from_sorted(vec![5, 9, 40]);
        let catalog = ItemCatalog::new(vec![1.0, 2.5, 4.0], id_map.clone()).unwrap();
        let csv = catalog.profits_csv();
        let parsed = ItemCatalog::from_profits_csv(&csv, id_map).unwrap();
        assert_eq!(parsed.profits(), catalog.profits());
    }

    #[test]
    fn profit_csv_rejects_missing_and_unknown() {
        let id_map = IdMap::from_sorted(vec![5, 9]);
        let err = ItemCatalog::from_profits_csv("item_id,profit\n5,1.0\n", id_map.clone());
        assert!(err.is_err());
        let err = ItemCatalog::from_profits_csv("item_id,profit\n5,1.0\n9,2.0\n11,3.0\n", id_map);
        assert!(err.is_err());
    }

    #[test]
    fn subsample_reindexes_items() {
        let f = write_csv(
            "userId,movieId,rating,timestamp\n1,50,4.0,0\n2,60,3.0,0\n3,70,2.0,0\n",
        );
        let ingest = load_ratings(f.path(), &ColumnSchema::default()).unwrap();
        let sub = subsample_consumers(&ingest, 2).unwrap();
        assert_eq!(sub.store.consumer_count(), 2);
        assert_eq!(sub.store.item_count(), 2);
        assert_eq!(sub.item_ids.external(0), 50);
        assert_eq!(sub.item_ids.external(1), 60);
    }
}
