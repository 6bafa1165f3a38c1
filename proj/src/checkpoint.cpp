#include "ctadapt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctadapt/errors.hpp"

namespace ctadapt {

namespace {

constexpr char kMagic[4] = {'D', 'L', 'C', 'K'};
constexpr std::uint32_t kMaxRank = 8;

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw CorruptCheckpointError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == in_.size(); }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u64(t.size());
    for (float v : t.data) w.f32(v);
}

Tensor read_tensor(Reader& r) {
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > kMaxRank) throw CorruptCheckpointError("bad tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u32();
    const std::uint64_t count = r.u64();
    if (count != element_count(shape)) throw CorruptCheckpointError("tensor length does not match shape");
    r.need(count * 4);
    Tensor t(shape);
    for (auto& v : t.data) v = r.f32();
    return t;
}

}  // namespace

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b) {
    return a.format_version == b.format_version && a.training_stage == b.training_stage &&
           a.rng_state == b.rng_state && bitwise_equal(a.model, b.model);
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(ckpt.format_version);
    w.u8(static_cast<std::uint8_t>(ckpt.training_stage));
    const ClassifierModel& m = ckpt.model;
    w.u32(static_cast<std::uint32_t>(m.input_side));
    w.u32(static_cast<std::uint32_t>(m.conv_layers.size()));
    w.f32(m.dropout_rate);
    w.f32(m.weight_decay);
    const auto params = parameters(m);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const Tensor* t : params) write_tensor(w, *t);
    w.u32(static_cast<std::uint32_t>(ckpt.rng_state.size()));
    w.bytes(ckpt.rng_state.data(), ckpt.rng_state.size());
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (r.str(4) != std::string(kMagic, 4)) throw CorruptCheckpointError("bad checkpoint magic");
    Checkpoint ckpt;
    ckpt.format_version = r.u32();
    if (ckpt.format_version != kCheckpointVersion) {
        throw UnsupportedVersionError("unsupported checkpoint version " +
                                      std::to_string(ckpt.format_version) + " (expected " +
                                      std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint8_t stage = r.u8();
    if (stage > static_cast<std::uint8_t>(TrainingStage::PostTransfer)) {
        throw CorruptCheckpointError("unknown training stage byte");
    }
    ckpt.training_stage = static_cast<TrainingStage>(stage);

    ClassifierModel& m = ckpt.model;
    m.input_side = static_cast<int>(r.u32());
    const std::uint32_t blocks = r.u32();
    if (blocks == 0 || blocks > 16) throw CorruptCheckpointError("bad conv block count");
    m.dropout_rate = r.f32();
    m.weight_decay = r.f32();
    m.conv_layers.resize(blocks);
    const std::uint32_t n_tensors = r.u32();
    if (n_tensors != 2 * blocks + 4) throw CorruptCheckpointError("unexpected tensor count");
    for (Tensor* t : parameters(m)) *t = read_tensor(r);

    // Shapes must compose into a forward-able network.
    std::size_t in_ch = 1;
    for (const auto& c : m.conv_layers) {
        if (c.kernels.rank() != 4 || c.kernels.dim(1) != in_ch || c.kernels.dim(2) != 3 ||
            c.kernels.dim(3) != 3 || c.bias.size() != c.kernels.dim(0)) {
            throw CorruptCheckpointError("inconsistent conv layer shapes");
        }
        in_ch = c.kernels.dim(0);
    }
    if (m.input_side < 1 || (m.input_side % (1 << blocks)) != 0 ||
        m.penult.weights.rank() != 2 || m.penult.weights.dim(0) != kPenultWidth ||
        m.penult.weights.dim(1) != m.feature_width() || m.penult.bias.size() != kPenultWidth ||
        m.head.weights.rank() != 2 || m.head.weights.dim(1) != kPenultWidth ||
        m.head.bias.size() != m.head.weights.dim(0)) {
        throw CorruptCheckpointError("inconsistent dense layer shapes");
    }

    ckpt.rng_state = r.str(r.u32());
    if (!r.at_end()) throw CorruptCheckpointError("trailing bytes after checkpoint");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

const char* to_string(TrainingStage stage) {
    switch (stage) {
        case TrainingStage::Fresh: return "Fresh";
        case TrainingStage::PostPretext: return "PostPretext";
        case TrainingStage::PostTransfer: return "PostTransfer";
    }
    return "?";
}

}  // namespace ctadapt
