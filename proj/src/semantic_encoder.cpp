#include "formstruct/semantic_encoder.hpp"

#include <map>
#include <mutex>

#include "formstruct/errors.hpp"

namespace formstruct {

namespace {
std::map<std::string, TextAdapterFn>& adapter_registry() {
    static std::map<std::string, TextAdapterFn> reg;
    return reg;
}
std::mutex adapter_mutex;
}  // namespace

void register_text_adapter(const std::string& name, TextAdapterFn fn) {
    std::lock_guard<std::mutex> lock(adapter_mutex);
    adapter_registry()[name] = std::move(fn);
}

bool text_adapter_registered(const std::string& name) {
    std::lock_guard<std::mutex> lock(adapter_mutex);
    return adapter_registry().count(name) > 0;
}

void TextEncoderSpec::validate() const {
    if (dim <= 0) throw ConfigError("text encoder: d^S must be positive");
    if (max_tokens <= 0) throw ConfigError("text encoder: max_tokens must be positive");
    if (kind == TextEncoderKind::builtin_recurrent) {
        if (hash_buckets <= 0 || embed_dim <= 0 || hidden <= 0)
            throw ConfigError("text encoder: builtin parameters must be positive");
    } else if (adapter_name.empty()) {
        throw ConfigError("text encoder: pretrained_adapter requires an adapter name");
    }
}

std::vector<uint32_t> utf8_codepoints(const std::string& text) {
    std::vector<uint32_t> cps;
    size_t i = 0;
    const auto bad = 0xFFFDu;
    while (i < text.size()) {
        const unsigned char b0 = static_cast<unsigned char>(text[i]);
        uint32_t cp = bad;
        size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 >> 5) == 0x6 && i + 1 < text.size()) {
            cp = (b0 & 0x1Fu) << 6 | (static_cast<unsigned char>(text[i + 1]) & 0x3Fu);
            len = 2;
        } else if ((b0 >> 4) == 0xE && i + 2 < text.size()) {
            cp = (b0 & 0x0Fu) << 12 | (static_cast<unsigned char>(text[i + 1]) & 0x3Fu) << 6 |
                 (static_cast<unsigned char>(text[i + 2]) & 0x3Fu);
            len = 3;
        } else if ((b0 >> 3) == 0x1E && i + 3 < text.size()) {
            cp = (b0 & 0x07u) << 18 | (static_cast<unsigned char>(text[i + 1]) & 0x3Fu) << 12 |
                 (static_cast<unsigned char>(text[i + 2]) & 0x3Fu) << 6 |
                 (static_cast<unsigned char>(text[i + 3]) & 0x3Fu);
            len = 4;
        }
        cps.push_back(cp);
        i += len;
    }
    return cps;
}

int SemanticEncoder::bucket_of(uint32_t codepoint, int buckets) {
    uint64_t z = codepoint + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<int>(z % static_cast<uint64_t>(buckets));
}

SemanticEncoder::SemanticEncoder(const TextEncoderSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    if (spec_.kind == TextEncoderKind::pretrained_adapter) {
        if (!text_adapter_registered(spec_.adapter_name))
            throw ConfigError("text adapter '" + spec_.adapter_name +
                              "' is not registered; fall back to the builtin_recurrent encoder "
                              "or register the adapter before building the model");
        return;
    }
    Tensor emb({spec_.hash_buckets, spec_.embed_dim});
    for (auto& v : emb.data) v = rng.normal(0.0, 0.1);
    embed_ = Param("semantic.embed", std::move(emb));
    rnn_ = BiLstmLayer("semantic.rnn", spec_.embed_dim, spec_.hidden, rng);
    proj_w_ = Param("semantic.proj.w", init_linear({spec_.dim, 2 * spec_.hidden}, 2 * spec_.hidden, rng));
    proj_b_ = Param("semantic.proj.b", Tensor({spec_.dim}));
}

Tape::Id SemanticEncoder::encode(Tape& tape, const std::string& text) {
    if (spec_.kind == TextEncoderKind::pretrained_adapter) {
        TextAdapterFn fn;
        {
            std::lock_guard<std::mutex> lock(adapter_mutex);
            auto it = adapter_registry().find(spec_.adapter_name);
            if (it == adapter_registry().end())
                throw ConfigError("text adapter '" + spec_.adapter_name + "' disappeared");
            fn = it->second;
        }
        std::vector<double> v = fn(text, spec_.dim);
        if (static_cast<int>(v.size()) != spec_.dim)
            throw ValidationError("text adapter returned dimension " + std::to_string(v.size()) +
                                  ", expected " + std::to_string(spec_.dim));
        return tape.constant(Tensor::vector_of(std::move(v)));
    }

    std::vector<uint32_t> cps = utf8_codepoints(text);
    if (static_cast<int>(cps.size()) > spec_.max_tokens) {
        cps.resize(static_cast<size_t>(spec_.max_tokens));
        truncations_.fetch_add(1);
    }
    Tape::Id table = tape.param(embed_);
    std::vector<Tape::Id> seq;
    seq.reserve(cps.size());
    for (uint32_t cp : cps) seq.push_back(tape.row(table, bucket_of(cp, spec_.hash_buckets)));
    Tape::Id final_hc = rnn_.final_states(tape, seq);
    return tape.add(tape.matvec(tape.param(proj_w_), final_hc), tape.param(proj_b_));
}

void SemanticEncoder::collect_params(std::vector<Param*>& out) {
    if (spec_.kind == TextEncoderKind::pretrained_adapter) return;
    out.push_back(&embed_);
    rnn_.collect(out);
    out.push_back(&proj_w_);
    out.push_back(&proj_b_);
}

}  // namespace formstruct
