#include "formstruct/visual_encoder.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "formstruct/errors.hpp"

namespace formstruct {

namespace {

struct BackboneEntry {
    int feature_dim;
    VisualBackboneFn fn;
};

std::map<std::string, BackboneEntry>& backbone_registry() {
    static std::map<std::string, BackboneEntry> reg;
    return reg;
}
std::mutex backbone_mutex;

int round_up(int v, int multiple) { return ((v + multiple - 1) / multiple) * multiple; }

}  // namespace

void register_visual_backbone(const std::string& name, int feature_dim, VisualBackboneFn fn) {
    std::lock_guard<std::mutex> lock(backbone_mutex);
    backbone_registry()[name] = BackboneEntry{feature_dim, std::move(fn)};
}

bool visual_backbone_registered(const std::string& name) {
    std::lock_guard<std::mutex> lock(backbone_mutex);
    return backbone_registry().count(name) > 0;
}

void VisualSpec::validate() const {
    if (input_height < 4 || input_height % 2 != 0)
        throw ConfigError("visual: input_height must be an even value >= 4");
    if (min_width < 4 || max_width < min_width)
        throw ConfigError("visual: require 4 <= min_width <= max_width");
    if (out_dim <= 0 || out_dim % 2 != 0)
        throw ConfigError("visual: d^V must be positive and even");
    if (backbone == "small_crnn" && channels.empty())
        throw ConfigError("visual: small_crnn needs at least one conv block");
    if (rnn_layers < 1) throw ConfigError("visual: rnn_layers must be >= 1");
}

ImageCrop prepare_crop(const Image& raw_crop, const VisualSpec& spec, int fragment_id) {
    if (raw_crop.empty()) throw ValidationError("prepare_crop: empty crop");
    const double scale = static_cast<double>(spec.input_height) / raw_crop.height;
    int new_w = std::max(1, static_cast<int>(std::lround(raw_crop.width * scale)));
    if (new_w > spec.max_width) new_w = spec.max_width;
    Image resized = resize(raw_crop, new_w, spec.input_height);
    // Width stride of 4 matches the backbone's two width poolings.
    const int target_w = round_up(std::max(new_w, spec.min_width), 4);
    if (target_w != resized.width) {
        Image padded(target_w, spec.input_height, 1.0f);  // background pad
        for (int y = 0; y < resized.height; ++y)
            for (int x = 0; x < resized.width; ++x)
                padded.px[static_cast<size_t>(y) * target_w + x] =
                    resized.px[static_cast<size_t>(y) * resized.width + x];
        resized = std::move(padded);
    }
    return ImageCrop{std::move(resized), fragment_id};
}

ImageCrop crop_and_resize(const Image& page_image, const RectClosure& closure, const VisualSpec& spec,
                          int fragment_id) {
    if (page_image.empty())
        throw ValidationError(
            "page image missing; disable the visual modality for this dataset or provide images");
    int x0 = std::clamp(static_cast<int>(std::floor(closure.x_min)), 0, page_image.width - 1);
    int y0 = std::clamp(static_cast<int>(std::floor(closure.y_min)), 0, page_image.height - 1);
    int x1 = std::clamp(static_cast<int>(std::ceil(closure.x_max)), x0 + 1, page_image.width);
    int y1 = std::clamp(static_cast<int>(std::ceil(closure.y_max)), y0 + 1, page_image.height);
    Image cut = crop_rect(page_image, x0, y0, x1 - x0, y1 - y0);
    return prepare_crop(cut, spec, fragment_id);
}

VisualEncoder::VisualEncoder(const VisualSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    if (spec_.backbone == "small_crnn") {
        int h = spec_.input_height;
        int ic = 1;
        width_stride_ = 1;
        for (size_t i = 0; i < spec_.channels.size(); ++i) {
            ConvBlock blk;
            const int oc = spec_.channels[i];
            Tensor w({oc, ic, 3, 3});
            const double std = std::sqrt(2.0 / (ic * 9));
            for (auto& v : w.data) v = rng.normal(0.0, std);
            blk.w = Param("visual.conv" + std::to_string(i) + ".w", std::move(w));
            blk.b = Param("visual.conv" + std::to_string(i) + ".b", Tensor({oc}));
            blk.pool_h = (h > 1 && h % 2 == 0) ? 2 : 1;
            blk.pool_w = (i < 2) ? 2 : 1;
            h /= blk.pool_h;
            width_stride_ *= blk.pool_w;
            blocks_.push_back(std::move(blk));
            ic = oc;
        }
        final_collapse_h_ = h;  // folded into the last pooling stage
        frame_dim_ = ic;
    } else {
        std::lock_guard<std::mutex> lock(backbone_mutex);
        auto it = backbone_registry().find(spec_.backbone);
        if (it == backbone_registry().end())
            throw ConfigError("visual backbone '" + spec_.backbone +
                              "' is not registered; use small_crnn or register the backbone first");
        frame_dim_ = it->second.feature_dim;
        external_backbone_ = true;
        width_stride_ = 4;
    }
    const int hidden = spec_.out_dim / 2;
    Rng r2 = rng.fork(7);
    int in_dim = frame_dim_;
    for (int l = 0; l < spec_.rnn_layers; ++l) {
        rnn_.emplace_back("visual.rnn" + std::to_string(l), in_dim, hidden, r2);
        in_dim = spec_.out_dim;
    }
}

int VisualEncoder::sequence_length(int width) const { return width / width_stride_; }

std::vector<Tape::Id> VisualEncoder::backbone_frames(Tape& tape, const ImageCrop& crop) {
    const Image& img = crop.pixels;
    if (img.height != spec_.input_height)
        throw ValidationError("crop height " + std::to_string(img.height) + " != H_in " +
                              std::to_string(spec_.input_height));
    if (external_backbone_) {
        VisualBackboneFn fn;
        {
            std::lock_guard<std::mutex> lock(backbone_mutex);
            fn = backbone_registry().at(spec_.backbone).fn;
        }
        std::vector<std::vector<double>> cols = fn(img);
        std::vector<Tape::Id> frames;
        for (auto& c : cols) {
            if (static_cast<int>(c.size()) != frame_dim_)
                throw ValidationError("visual backbone returned a wrong feature dimension");
            frames.push_back(tape.constant(Tensor::vector_of(std::move(c))));
        }
        if (frames.empty()) throw ValidationError("visual backbone returned no frames");
        return frames;
    }

    // Ink-on-paper normalization: dark input pixels carry the signal, padding
    // (background) maps to zero.
    Tensor x({1, img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int xx = 0; xx < img.width; ++xx)
            x.data[static_cast<size_t>(y) * img.width + xx] = 1.0 - img.at(xx, y);
    Tape::Id map = tape.constant(std::move(x));
    for (size_t i = 0; i < blocks_.size(); ++i) {
        ConvBlock& blk = blocks_[i];
        map = tape.relu(tape.conv2d(map, tape.param(blk.w), tape.param(blk.b)));
        int ph = blk.pool_h;
        if (i + 1 == blocks_.size() && final_collapse_h_ > 1) ph *= final_collapse_h_;
        if (ph > 1 || blk.pool_w > 1) map = tape.maxpool(map, ph, blk.pool_w);
    }
    const int map_h = tape.val(map).dim(1);
    const int map_w = tape.val(map).dim(2);
    if (map_h != 1)
        throw ConfigError("visual backbone produced height " + std::to_string(map_h) +
                          ", expected 1; adjust input_height/conv blocks");
    std::vector<Tape::Id> frames;
    frames.reserve(static_cast<size_t>(map_w));
    for (int t = 0; t < map_w; ++t) frames.push_back(tape.colvec(map, t));
    return frames;
}

Tape::Id VisualEncoder::encode(Tape& tape, const ImageCrop& crop) {
    return encode_with_states(tape, crop, nullptr);
}

Tape::Id VisualEncoder::encode_with_states(Tape& tape, const ImageCrop& crop,
                                           std::vector<Tape::Id>* states) {
    std::vector<Tape::Id> seq = backbone_frames(tape, crop);
    for (auto& layer : rnn_) seq = layer.run(tape, seq);
    if (states) *states = seq;
    return tape.maxvec(seq);
}

void VisualEncoder::collect_params(std::vector<Param*>& out) {
    for (auto& blk : blocks_) {
        out.push_back(&blk.w);
        out.push_back(&blk.b);
    }
    for (auto& layer : rnn_) layer.collect(out);
}

}  // namespace formstruct
