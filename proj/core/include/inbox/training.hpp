#pragma once

// Loss, reverse-mode gradients for every stage, Adam, the learning-rate
// schedule and the three-stage pipeline.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "inbox/checkpoint.hpp"
#include "inbox/kg_data.hpp"
#include "inbox/model.hpp"
#include "inbox/rng.hpp"
#include "inbox/sampling.hpp"

namespace inbox {

struct TrainConfig {
  std::size_t dim = 512;
  double margin = 12.0;
  double init_scale = 0.0;  // 0 selects d / 8
  IntersectionNetConfig net;

  std::size_t batch_size = 256;
  std::size_t n_negatives = 256;
  double base_lr = 1e-4;
  // Decay points as fractions of a stage's maximum step count, with the
  // multiplier (relative to base_lr) that applies from each point on.
  std::vector<double> lr_milestones{0.5, 0.75};
  std::vector<double> lr_factors{0.2, 0.04};
  std::size_t epochs_pretrain = 100;
  std::size_t epochs_intersection = 100;
  std::size_t epochs_recommendation = 30;
  double alpha = 4.0;
  std::uint64_t seed = 0;

  // Ablation toggles.
  bool pretrain = true;       // false: w/o B
  bool only_irt = false;      // stage 1 draws IRT triplets only
  bool intersection = true;   // false: w/o I
  InterestConfig interest;    // M-M I, w/o userI, only userI, history cap
  bool literal_loss = false;
  bool freeze_attention_in_recommendation = false;

  double clip_norm = 100.0;
  double validation_fraction = 0.05;
  std::size_t patience = 2;
  std::size_t eval_k = 20;
  std::size_t eval_threads = 1;

  // Throws ConfigError on invalid values.
  void validate() const;
};

std::vector<Stage> enabled_stages(const TrainConfig& cfg);

// --- loss -------------------------------------------------------------------

double log_sigmoid(double x);

// Bounded form: -w (log s(g - dp) + 1/n sum log s(dn - g)).
// Literal form: -w (log s(g - dp) - 1/n sum log s(g - dn)).
double margin_loss(double d_pos, std::span<const double> d_negs, double w, double gamma,
                   bool literal_form);

struct MarginLossGrad {
  double loss = 0.0;
  double d_pos = 0.0;
  std::vector<double> d_negs;
};
MarginLossGrad margin_loss_grad(double d_pos, std::span<const double> d_negs, double w,
                                double gamma, bool literal_form);

// --- batches ----------------------------------------------------------------

struct PretrainExample {
  TripletType type = TripletType::IRT;
  Triplet triplet;
  std::vector<Negative> negatives;
  double weight = 1.0;
};

struct IntersectionExample {
  Id item = 0;
  std::vector<Id> negatives;
  double weight = 1.0;
};

struct RecommendationExample {
  Id positive = 0;
  std::vector<Id> negatives;
  double weight = 1.0;
};

// Examples of one user share the user box built from `history`.
struct RecommendationGroup {
  Id user = 0;
  std::vector<Id> history;
  std::vector<RecommendationExample> examples;
};

struct Batch {
  Stage stage = Stage::Pretrain;
  std::vector<PretrainExample> pretrain;
  std::vector<IntersectionExample> intersection;
  std::vector<RecommendationGroup> recommendation;

  std::size_t size() const;
};

// Interactions used by stage 3: training pairs minus the validation holdout.
struct TrainingView {
  InteractionGraph graph;  // train = fitted items, test = validation holdout
  std::vector<std::pair<Id, Id>> pairs;  // (user, item) stage-3 atoms
};

// Holds out ceil(fraction * m) items of every user with m >= 2 training items.
TrainingView make_training_view(const InteractionGraph& graph, double fraction, Rng& rng);

class BatchSampler {
 public:
  BatchSampler(const Dataset& ds, const TrainingView& view, const TrainConfig& cfg);

  std::size_t atoms(Stage stage) const;
  std::size_t steps_per_epoch(Stage stage) const;

  // Stage 1 draws a triplet class per step, then a batch of that class.
  Batch pretrain_batch(Rng& rng) const;
  // Stages 2 and 3 walk an epoch permutation of their atoms in chunks.
  Batch intersection_batch(std::span<const Id> items, Rng& rng) const;
  Batch recommendation_batch(std::span<const std::pair<Id, Id>> pairs, Rng& rng) const;

  const std::vector<Id>& intersection_items() const { return items_with_concepts_; }

 private:
  const Dataset* ds_;
  const TrainingView* view_;
  const TrainConfig* cfg_;
  NegativeSampler negatives_;
  std::optional<TripletTypeSampler> types_;  // empty without triplets
  std::vector<Id> items_with_concepts_;
};

// --- gradients --------------------------------------------------------------

using GradTape = ParamTables;

struct StepResult {
  double loss = 0.0;
  GradTape tape;
};

// Mean loss over the batch and its exact gradient.
StepResult grad_step(const Batch& batch, const ParamStore& store, const ConceptIndex& concepts,
                     const TrainConfig& cfg);
// Forward only.
double batch_loss(const Batch& batch, const ParamStore& store, const ConceptIndex& concepts,
                  const TrainConfig& cfg);

// --- optimizer --------------------------------------------------------------

double lr_schedule(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

// Scales the tape to global L2 norm max_norm when above it. Returns the norm
// before scaling.
double clip_gradients(GradTape& tape, double max_norm);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moments live in `state`, which persists across
// stages and through checkpoints.
void adam_update(ParamTables& params, const GradTape& grad, OptimizerState& state, double lr,
                 const AdamConfig& adam = {});

// --- pipeline ---------------------------------------------------------------

struct LogRecord {
  Stage stage = Stage::Pretrain;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double recall20 = 0.0;  // NaN outside stage 3
};

void write_log_record(std::ostream& out, const LogRecord& r);

struct PipelineState {
  ParamStore store;
  OptimizerState optimizer;
};

struct PipelineHooks {
  std::function<void(const LogRecord&)> on_epoch;
  std::function<void(Stage, const PipelineState&)> on_stage_end;
};

// Runs every enabled stage after store.stage_completed. A fresh state comes
// from init_pipeline.
PipelineState init_pipeline(const Dataset& ds, const TrainConfig& cfg);
void run_pipeline(const Dataset& ds, const TrainConfig& cfg, PipelineState& state,
                  const PipelineHooks& hooks = {});
PipelineState run_pipeline(const Dataset& ds, const TrainConfig& cfg,
                           const PipelineHooks& hooks = {});

}  // namespace inbox
