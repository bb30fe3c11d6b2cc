#pragma once

#include "csattn/config.hpp"
#include "csattn/dataset.hpp"
#include "csattn/net.hpp"

namespace csattn {

struct EvalSummary {
    double loss = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    double mae = 0.0;
};

struct TrainResult {
    std::vector<float> step_losses;  // training loss per step
    EvalSummary final_eval;          // deterministic post-training pass over the train set
    std::string init_checkpoint;
    std::string final_checkpoint;
    std::string csv_path;
};

// Full training recipe: forward_multiscale -> multiscale_loss -> backward ->
// AdamW with cosine annealing, CSV row per step, periodic checkpoints.
// Bitwise deterministic for a fixed seed and thread configuration.
TrainResult train(const TrainConfig& cfg);

PairDataset build_dataset(const TrainConfig& cfg);

// Mean training loss / metrics of a parameter set over a dataset, full
// images, no augmentation.
EvalSummary evaluate_on_dataset(const Net<float>& net, const PairDataset& ds, const LossWeights& weights);

// Loss of the step-0 training batch under the given parameters; the batch is
// derived exactly as train() derives it.
float first_batch_loss(const TrainConfig& cfg, const ParamStore<float>& params);

}  // namespace csattn
