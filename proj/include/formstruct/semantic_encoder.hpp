#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "formstruct/recurrent.hpp"
#include "formstruct/tape.hpp"

namespace formstruct {

enum class TextEncoderKind { builtin_recurrent, pretrained_adapter };

struct TextEncoderSpec {
    TextEncoderKind kind = TextEncoderKind::builtin_recurrent;
    int dim = 64;           // d^S
    int max_tokens = 128;   // longer texts are truncated, not rejected
    int hash_buckets = 4096;
    int embed_dim = 32;
    int hidden = 32;        // per-direction recurrent width
    std::string adapter_name;  // for the pretrained kind

    void validate() const;
};

// External sentence-encoder binding: maps a string to a d^S vector. Concrete
// adapters (wrapping a pretrained language model) register by name from
// outside the core.
using TextAdapterFn = std::function<std::vector<double>(const std::string& text, int dim)>;
void register_text_adapter(const std::string& name, TextAdapterFn fn);
bool text_adapter_registered(const std::string& name);

// Produces the per-fragment semantic feature from the raw text alone.
// The builtin kind hashes unicode code points into an embedding table, runs
// a bidirectional character-level recurrent pass, and projects the
// concatenated final states to d^S.
class SemanticEncoder {
public:
    SemanticEncoder(const TextEncoderSpec& spec, Rng& rng);

    Tape::Id encode(Tape& tape, const std::string& text);

    const TextEncoderSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim; }
    void collect_params(std::vector<Param*>& out);
    uint64_t truncation_count() const { return truncations_.load(); }

    // Hash-bucket assignment for one code point; exposed for tests.
    static int bucket_of(uint32_t codepoint, int buckets);

private:
    TextEncoderSpec spec_;
    Param embed_;       // {hash_buckets, embed_dim}
    BiLstmLayer rnn_;
    Param proj_w_;      // {d^S, 2*hidden}
    Param proj_b_;      // {d^S}
    mutable std::atomic<uint64_t> truncations_{0};
};

// Decodes UTF-8 into code points; invalid bytes decode as U+FFFD.
std::vector<uint32_t> utf8_codepoints(const std::string& text);

}  // namespace formstruct
