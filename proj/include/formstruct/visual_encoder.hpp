#pragma once

#include <functional>
#include <string>
#include <vector>

#include "formstruct/document.hpp"
#include "formstruct/image.hpp"
#include "formstruct/recurrent.hpp"
#include "formstruct/tape.hpp"

namespace formstruct {

struct VisualSpec {
    std::string backbone = "small_crnn";
    int input_height = 32;  // H_in
    int min_width = 32;     // W_min
    int max_width = 512;    // W_max
    std::vector<int> channels = {8, 16, 24, 32, 48};  // conv block widths
    int rnn_layers = 2;
    int out_dim = 96;  // d^V; the model forces d^S + d^L

    void validate() const;
};

// A fragment crop normalized for the backbone: fixed height, width clamped
// to [W_min, W_max] and padded to the backbone's width stride, values [0,1].
struct ImageCrop {
    Image pixels;
    int fragment_id = -1;
};

// Frozen external backbone contract: maps a normalized crop to a width-wise
// sequence of feature columns (the height-1 feature map read column by
// column). Bindings such as a modified Resnet50 register from outside the
// core.
using VisualBackboneFn = std::function<std::vector<std::vector<double>>(const Image& crop)>;
void register_visual_backbone(const std::string& name, int feature_dim, VisualBackboneFn fn);
bool visual_backbone_registered(const std::string& name);

// Cuts the closure from the page image (clamping to bounds), resizes to
// height H_in preserving aspect ratio, clamps/pads the width.
ImageCrop crop_and_resize(const Image& page_image, const RectClosure& closure, const VisualSpec& spec,
                          int fragment_id = -1);
// Same normalization for a crop that was already cut from the page.
ImageCrop prepare_crop(const Image& raw_crop, const VisualSpec& spec, int fragment_id = -1);

// CNN -> height-1 feature map -> width-wise sequence -> two-layer
// bidirectional recurrent encoder -> elementwise max over time.
class VisualEncoder {
public:
    VisualEncoder(const VisualSpec& spec, Rng& rng);

    Tape::Id encode(Tape& tape, const ImageCrop& crop);
    // Also exposes the per-timestep recurrent states for inspection/tests.
    Tape::Id encode_with_states(Tape& tape, const ImageCrop& crop, std::vector<Tape::Id>* states);

    const VisualSpec& spec() const { return spec_; }
    int dim() const { return spec_.out_dim; }
    // Sequence length the backbone produces for a given padded crop width.
    int sequence_length(int width) const;
    void collect_params(std::vector<Param*>& out);

private:
    struct ConvBlock {
        Param w;  // {oc, ic, 3, 3}
        Param b;  // {oc}
        int pool_h = 1;
        int pool_w = 1;
    };

    std::vector<Tape::Id> backbone_frames(Tape& tape, const ImageCrop& crop);

    VisualSpec spec_;
    std::vector<ConvBlock> blocks_;
    int final_collapse_h_ = 1;  // last-pooling adjustment when height remains
    int width_stride_ = 1;
    int frame_dim_ = 0;  // backbone output channels
    bool external_backbone_ = false;
    std::vector<BiLstmLayer> rnn_;
};

}  // namespace formstruct
