#pragma once

#include <array>

#include "te/adam.hpp"
#include "te/corpus.hpp"
#include "te/layers.hpp"
#include "te/losses.hpp"

namespace te {

// Two-branch autoencoder: (48x48x3 context, 13-d affordances) -> 256-d
// embedding -> (16x16x3 center tile, 13 affordance probabilities).
struct AutoencoderConfig {
    std::array<int, 3> conv_filters{32, 32, 16};
    std::array<int, 2> aff_encoder{32, 16};
    int embedding_dim = 256;
    std::array<int, 2> aff_decoder{16, 32};
    std::array<int, 2> img_decoder_filters{32, 32};  // after the two upsamples
    double image_loss_weight = 0.8;
    double affordance_loss_weight = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
    int flatten_dim() const { return 6 * 6 * conv_filters[2]; }  // 48 -> 24 -> 12 -> 6
};

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 200;
    double val_fraction = 0.2;
    int patience = 10;
    AdamConfig adam;
    std::uint64_t seed = 0;
    double target_train_loss = 0.0;  // 0 disables the early exit
};

struct TrainReport {
    std::vector<double> train_total, train_image, train_affordance;
    std::vector<double> val_total, val_image, val_affordance;
    int stopping_epoch = 0;
    int best_epoch = 0;  // 1-based epoch whose validation loss was minimal
};

struct LossParts {
    double total = 0, image_mse = 0, affordance_wbce = 0;
};

struct XaeBatch {
    Tensor context;     // [N,48,48,3]
    Tensor aff_in;      // [N,13]
    Tensor tile_target; // [N,16,16,3]
    Tensor aff_target;  // [N,13]
    int n() const { return context.dim(0); }
};

XaeBatch make_batch(const std::vector<ContextSample>& samples, const std::vector<int>& idx);

class Xae {
public:
    AutoencoderConfig cfg;

    static Xae build(const AutoencoderConfig& cfg);

    struct Cache;  // per-batch activations for the backward pass

    // Batch front ends; train=true uses batch statistics in batchnorm.
    Tensor encode_batch(const Tensor& context, const Tensor& aff, bool train, Cache* cache = nullptr);
    std::pair<Tensor, Tensor> decode_batch(const Tensor& emb, Cache* cache = nullptr);

    // Single-sample convenience wrappers (inference mode).
    Tensor encode(const Tensor& context, const AffordanceVector& aff);
    std::pair<Tensor, Tensor> decode(const Tensor& embedding);

    // Combined loss; when with_grads, parameter gradients are accumulated.
    LossParts loss(const XaeBatch& batch, const Tensor& label_weights, bool train,
                   bool with_grads);

    std::pair<AffordanceVector, Tensor> predict_affordances(const Tensor& context,
                                                            double threshold = 0.5);

    TrainReport train(const std::vector<ContextSample>& samples, const Tensor& label_weights,
                      const TrainConfig& tc);

    std::vector<ParamRef> params();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;  // incl. bn stats
    void zero_grads();
    std::size_t param_count() const;

    void save(const std::filesystem::path& path) const;
    static Xae load(const std::filesystem::path& path);

private:
    friend struct XaeAccess;
    Conv2d conv1_, conv2_, conv3_;
    BatchNorm bn1_, bn2_, bn3_;
    Dense aff1_, aff2_, merge_;
    Dense dec_fc_;
    Deconv2d up1_, up2_;
    Conv2d out_conv_;
    Dense daff1_, daff2_, daff_out_;
};

struct Xae::Cache {
    bool train = false;
    // encoder
    Tensor ctx, aff_in;
    Tensor c1, t1, c2, t2, c3, t3;  // post-bn pre-tanh outputs and tanh outputs
    BatchNorm::Cache bc1, bc2, bc3;
    Tensor flat;            // [N, flatten]
    Tensor a1, a1t, a2, a2t;
    Tensor merged_in;       // [N, flatten+aff_enc1]
    Tensor emb;             // [N, 256] post-tanh
    // decoder
    Tensor fc, fct;         // dense out, tanh
    Tensor r;               // [N,4,4,16]
    Tensor u1, u1t, u2, u2t;
    Tensor oc, tile;        // conv out, sigmoid
    Tensor d1, d1t, d2, d2t, dout, probs;
};

}  // namespace te
