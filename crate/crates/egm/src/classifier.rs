//! Model banks and minimum-cost classification.

use crate::error::{Error, Result};
use crate::gabor::{GaborParams, JetExtractor, JetField};
use crate::graph::{GridGeometry, GridGraph, GridSpec};
use crate::matcher::{match_prepared_multi, CostParams, MatchResult, PreparedTest};
use crate::mnist::{Image, LabelledSet, CANVAS, NUM_CLASSES};
use crate::slant::{deslant_context, SlantEstimate};

#[derive(Debug, Clone)]
pub struct ModelEntry {
    /// Index of the image in its source file.
    pub model_id: usize,
    pub class: u8,
    pub graph: GridGraph,
    pub slant: SlantEstimate,
}

/// Stored model graphs, all built with the same Gabor and grid settings.
#[derive(Debug, Clone)]
pub struct ModelBank {
    pub entries: Vec<ModelEntry>,
    pub gabor: GaborParams,
    pub grid: GridSpec,
    pub deslant: bool,
}

impl ModelBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for e in &self.entries {
            counts[e.class as usize] += 1;
        }
        counts
    }
}

/// Gabor params (with slant applied) and grid rotation for one image.
pub fn image_context(img: &Image, gabor: &GaborParams, deslant: bool) -> Result<(GaborParams, f64, SlantEstimate)> {
    if deslant {
        let ctx = deslant_context(img, gabor)?;
        Ok((ctx.params, ctx.grid_rotation, ctx.slant))
    } else {
        Ok((*gabor, 0.0, SlantEstimate::UPRIGHT))
    }
}

/// Jet fields of every image, each extracted with its own slant when
/// `deslant` is set. This is what the jet cache stores.
pub fn extract_fields(images: &[Image], gabor: &GaborParams, deslant: bool, parallel: bool) -> Result<Vec<JetField>> {
    let extractor = JetExtractor::new(CANVAS, CANVAS);
    let one = |img: &Image| -> Result<JetField> {
        let (params, _, _) = image_context(img, gabor, deslant)?;
        extractor.extract(img, &params)
    };
    map_maybe_parallel(images, parallel, one)
}

/// Places each model's (rotated) grid at the canvas center and samples jets.
pub fn build_model_bank_from_fields(
    models: &LabelledSet,
    fields: &[JetField],
    gabor: &GaborParams,
    grid: &GridSpec,
    deslant: bool,
) -> Result<ModelBank> {
    if fields.len() != models.len() {
        return Err(Error::Argument(format!(
            "{} jet fields for {} models",
            fields.len(),
            models.len()
        )));
    }
    let mut entries = Vec::with_capacity(models.len());
    for (k, field) in fields.iter().enumerate() {
        let (_, rotation, slant) = image_context(&models.images[k], gabor, deslant)?;
        let geometry = GridGeometry::for_spec(grid, rotation)?;
        entries.push(ModelEntry {
            model_id: models.ids[k],
            class: models.labels[k],
            graph: crate::graph::sample_jets(&geometry, field),
            slant,
        });
    }
    Ok(ModelBank {
        entries,
        gabor: *gabor,
        grid: *grid,
        deslant,
    })
}

pub fn build_model_bank(models: &LabelledSet, gabor: &GaborParams, grid: &GridSpec, deslant: bool) -> Result<ModelBank> {
    let fields = extract_fields(&models.images, gabor, deslant, cfg!(feature = "parallel"))?;
    build_model_bank_from_fields(models, &fields, gabor, grid, deslant)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub predicted: u8,
    pub best_model_id: usize,
    pub best_cost: f64,
    /// Lowest cost reached by any model of each class (infinite if absent).
    pub per_class_best: [f64; NUM_CLASSES],
    /// Lowest cost among models of a different class than the winner.
    pub runner_up_cost: f64,
}

/// Running per-class minimum keyed on `(cost, model_id)`.
#[derive(Debug, Clone)]
struct Tally {
    per_class: [(f64, usize); NUM_CLASSES],
}

impl Tally {
    fn new() -> Self {
        Tally {
            per_class: [(f64::INFINITY, usize::MAX); NUM_CLASSES],
        }
    }

    fn push(&mut self, cost: f64, model_id: usize, class: u8) {
        let slot = &mut self.per_class[class as usize];
        if cost < slot.0 || (cost == slot.0 && model_id < slot.1) {
            *slot = (cost, model_id);
        }
    }

    fn finish(self) -> Classification {
        let best_cost = self.per_class.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let predicted = self
            .per_class
            .iter()
            .position(|s| s.0 == best_cost)
            .expect("nonempty bank");
        let runner_up_cost = (0..NUM_CLASSES)
            .filter(|&c| c != predicted)
            .map(|c| self.per_class[c].0)
            .fold(f64::INFINITY, f64::min);
        Classification {
            predicted: predicted as u8,
            best_model_id: self.per_class[predicted].1,
            best_cost,
            per_class_best: self.per_class.map(|s| s.0),
            runner_up_cost,
        }
    }
}

/// Classifies one prepared test under several distortion weights at once.
pub fn classify_prepared(test: &PreparedTest, bank: &ModelBank, params: &[CostParams]) -> Result<Vec<Classification>> {
    if bank.is_empty() {
        return Err(Error::Argument("cannot classify against an empty model bank".into()));
    }
    let step = bank.grid.step();
    let mut tallies = vec![Tally::new(); params.len()];
    for entry in &bank.entries {
        let results = match_prepared_multi(test, &entry.graph, params, step)?;
        for (tally, r) in tallies.iter_mut().zip(&results) {
            tally.push(r.total_cost, entry.model_id, entry.class);
        }
    }
    Ok(tallies.into_iter().map(Tally::finish).collect())
}

pub fn prepare_test(img: &Image, bank: &ModelBank, extractor: &JetExtractor) -> Result<PreparedTest> {
    PreparedTest::new(img, &bank.gabor, &bank.grid, bank.deslant, extractor)
}

/// Class of the lowest-cost model; ties go to the lower model id.
pub fn classify(test: &Image, bank: &ModelBank, params: CostParams) -> Result<Classification> {
    if bank.is_empty() {
        return Err(Error::Argument("cannot classify against an empty model bank".into()));
    }
    let extractor = JetExtractor::new(test.width(), test.height());
    let prepared = prepare_test(test, bank, &extractor)?;
    Ok(classify_prepared(&prepared, bank, &[params])?.remove(0))
}

/// Per-test outcome inside an [`Evaluation`].
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub test_id: usize,
    pub truth: u8,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub outcomes: Vec<TestOutcome>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl Evaluation {
    fn from_outcomes(outcomes: Vec<TestOutcome>) -> Self {
        let mut confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
        for o in &outcomes {
            confusion[o.truth as usize][o.classification.predicted as usize] += 1;
        }
        Evaluation { outcomes, confusion }
    }

    pub fn total(&self) -> usize {
        self.outcomes.len()
    }

    pub fn correct(&self) -> usize {
        (0..NUM_CLASSES).map(|c| self.confusion[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        self.correct() as f64 / self.total() as f64
    }

    /// Accuracy per true class; `None` for classes without tests.
    pub fn per_class_accuracy(&self) -> [Option<f64>; NUM_CLASSES] {
        let mut out = [None; NUM_CLASSES];
        for (c, row) in self.confusion.iter().enumerate() {
            let n: usize = row.iter().sum();
            if n > 0 {
                out[c] = Some(row[c] as f64 / n as f64);
            }
        }
        out
    }
}

fn map_maybe_parallel<T, U, F>(items: &[T], parallel: bool, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Classifies every test image under each weight in `params`, returning one
/// evaluation per weight. Serial and parallel runs give identical results.
pub fn evaluate_multi(
    tests: &LabelledSet,
    bank: &ModelBank,
    params: &[CostParams],
    parallel: bool,
) -> Result<Vec<Evaluation>> {
    let fields = extract_fields(&tests.images, &bank.gabor, bank.deslant, parallel)?;
    evaluate_fields(tests, &fields, bank, params, parallel)
}

/// Like [`evaluate_multi`] with test jet fields already extracted.
pub fn evaluate_fields(
    tests: &LabelledSet,
    fields: &[JetField],
    bank: &ModelBank,
    params: &[CostParams],
    parallel: bool,
) -> Result<Vec<Evaluation>> {
    if bank.is_empty() {
        return Err(Error::Argument("cannot evaluate against an empty model bank".into()));
    }
    let indices: Vec<usize> = (0..tests.len()).collect();
    let per_test = map_maybe_parallel(&indices, parallel, |&k| {
        let (_, rotation, slant) = image_context(&tests.images[k], &bank.gabor, bank.deslant)?;
        let geometry = GridGeometry::for_spec(&bank.grid, rotation)?;
        let graph = crate::graph::sample_jets(&geometry, &fields[k]);
        let prepared = PreparedTest::from_parts(fields[k].clone(), graph, slant);
        classify_prepared(&prepared, bank, params)
    })?;
    let mut evals: Vec<Vec<TestOutcome>> = vec![Vec::with_capacity(tests.len()); params.len()];
    for (k, classes) in per_test.into_iter().enumerate() {
        for (slot, c) in evals.iter_mut().zip(classes) {
            slot.push(TestOutcome {
                test_id: tests.ids[k],
                truth: tests.labels[k],
                classification: c,
            });
        }
    }
    Ok(evals.into_iter().map(Evaluation::from_outcomes).collect())
}

pub fn evaluate(tests: &LabelledSet, bank: &ModelBank, params: CostParams) -> Result<Evaluation> {
    Ok(evaluate_multi(tests, bank, &[params], cfg!(feature = "parallel"))?.remove(0))
}

/// Full match of a test against one bank entry, for inspection.
pub fn inspect_match(test: &Image, bank: &ModelBank, model_index: usize, params: CostParams) -> Result<(PreparedTest, MatchResult)> {
    let entry = bank
        .entries
        .get(model_index)
        .ok_or_else(|| Error::Argument(format!("model index {model_index} outside bank of {}", bank.len())))?;
    let extractor = JetExtractor::new(test.width(), test.height());
    let prepared = prepare_test(test, bank, &extractor)?;
    let result = match_prepared_multi(&prepared, &entry.graph, &[params], bank.grid.step())?.remove(0);
    Ok((prepared, result))
}
