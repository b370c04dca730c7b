#include "formstruct/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "formstruct/errors.hpp"

namespace formstruct {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'C', 'K'};
constexpr char kFooter[4] = {'F', 'E', 'N', 'D'};
constexpr uint32_t kVersion = 1;

uint32_t crc32_table_entry(uint32_t i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    return c;
}

uint32_t crc32_update(uint32_t crc, const void* data, size_t len) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) table[i] = crc32_table_entry(i);
        init = true;
    }
    const auto* p = static_cast<const unsigned char*>(data);
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot create checkpoint: " + path);
    }
    void raw(const void* data, size_t len) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        crc_ = crc32_update(crc_, data, len);
    }
    void u32(uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        raw(b, 4);
    }
    void u64(uint64_t v) {
        u32(static_cast<uint32_t>(v));
        u32(static_cast<uint32_t>(v >> 32));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void footer() {
        const uint32_t crc = crc_;
        u32(crc);  // crc of everything before the footer
        out_.write(kFooter, 4);
        if (!out_) throw IoError("checkpoint write failed");
    }

private:
    std::ofstream out_;
    uint32_t crc_ = 0;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open checkpoint: " + path);
    }
    void raw(void* data, size_t len) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
        if (static_cast<size_t>(in_.gcount()) != len)
            throw IoError("checkpoint truncated or corrupt: " + path_);
        crc_ = crc32_update(crc_, data, len);
    }
    uint32_t u32() {
        unsigned char b[4];
        raw(b, 4);
        return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
               static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
    }
    uint64_t u64() {
        const uint64_t lo = u32();
        const uint64_t hi = u32();
        return lo | hi << 32;
    }
    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str() {
        const uint32_t len = u32();
        if (len > (1u << 30)) throw ParseError("checkpoint string length implausible: " + path_);
        std::string s(len, '\0');
        if (len) raw(s.data(), len);
        return s;
    }
    void check_footer() {
        const uint32_t stored_at = crc_;  // crc of body before reading the crc field
        const uint32_t stored = u32();
        char foot[4];
        in_.read(foot, 4);
        if (in_.gcount() != 4 || std::memcmp(foot, kFooter, 4) != 0)
            throw IoError("checkpoint truncated or corrupt: " + path_);
        if (stored != stored_at)
            throw IoError("checkpoint integrity check failed (crc mismatch): " + path_);
    }

private:
    std::ifstream in_;
    std::string path_;
    uint32_t crc_ = 0;
};

void read_header(Reader& r, CheckpointMeta& meta) {
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a formstruct checkpoint");
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw ParseError("checkpoint format version " + std::to_string(version) +
                         " is unsupported (expected " + std::to_string(kVersion) +
                         "); migrate the file first");
    meta.model_seed = r.u64();
    meta.epochs_completed = static_cast<int>(r.u32());
    meta.model_config_json = r.str();
    meta.train_config_json = r.str();
    meta.metrics_json = r.str();
}

}  // namespace

void save_checkpoint(DocModel& model, const TrainConfig* train_config, const std::string& path) {
    Writer w(path);
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u64(model.seed());
    w.u32(static_cast<uint32_t>(model.epochs_completed));
    w.str(model.config().to_json());
    w.str(train_config ? train_config->to_json() : "{}");
    w.str(model.metrics_snapshot_json);
    const auto& params = model.params();
    w.u32(static_cast<uint32_t>(params.size()));
    for (const Param* p : params) {
        w.str(p->name);
        w.u32(static_cast<uint32_t>(p->value.shape.size()));
        for (int d : p->value.shape) w.u32(static_cast<uint32_t>(d));
        for (int64_t i = 0; i < p->value.numel(); ++i) w.f32(static_cast<float>(p->value[i]));
    }
    w.footer();
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    Reader r(path);
    CheckpointMeta meta;
    read_header(r, meta);
    return meta;
}

namespace {

void load_tensors_into(DocModel& model, Reader& r, const std::string& path) {
    const uint32_t n = r.u32();
    std::map<std::string, Param*> by_name;
    for (Param* p : model.params()) by_name[p->name] = p;
    if (n != by_name.size())
        throw ValidationError("checkpoint holds " + std::to_string(n) + " tensors, model expects " +
                              std::to_string(by_name.size()) + " (" + path + ")");
    for (uint32_t i = 0; i < n; ++i) {
        const std::string name = r.str();
        const uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw ValidationError("checkpoint tensor '" + name + "' has no counterpart in the model");
        Param& p = *it->second;
        if (p.value.shape != shape) {
            Tensor tmp(shape);
            throw ValidationError("shape mismatch for tensor '" + name + "': checkpoint " +
                                  tmp.shape_str() + " vs model " + p.value.shape_str());
        }
        for (int64_t k = 0; k < p.value.numel(); ++k) p.value[k] = static_cast<double>(r.f32());
    }
    r.check_footer();
}

}  // namespace

std::unique_ptr<DocModel> load_checkpoint(const std::string& path) {
    Reader r(path);
    CheckpointMeta meta;
    read_header(r, meta);
    auto model = std::make_unique<DocModel>(ModelConfig::from_json(meta.model_config_json),
                                            meta.model_seed);
    model->epochs_completed = meta.epochs_completed;
    model->metrics_snapshot_json = meta.metrics_json;
    load_tensors_into(*model, r, path);
    return model;
}

void load_checkpoint_into(DocModel& model, const std::string& path) {
    Reader r(path);
    CheckpointMeta meta;
    read_header(r, meta);
    load_tensors_into(model, r, path);
    model.epochs_completed = meta.epochs_completed;
    model.metrics_snapshot_json = meta.metrics_json;
}

}  // namespace formstruct
