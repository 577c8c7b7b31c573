#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgae/encoder.hpp"
#include "sgae/error.hpp"
#include "sgae/nn.hpp"
#include "sgae/optim.hpp"
#include "sgae/train.hpp"

namespace sgae {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

enum class TrainMode : std::uint8_t { kPretrain = 0, kFinetune = 1 };

/// Everything a run needs to resume besides the tensors themselves.
struct CheckpointInfo {
  TrainMode mode = TrainMode::kPretrain;
  AblationFlags ablation;
  std::uint32_t epoch = 0;
  ModelConfig model;
  std::uint64_t rng_state = 0;

  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double plateau_factor = 0.5;
  double best_monitored = std::numeric_limits<double>::infinity();
  std::uint64_t step_count = 0;
  std::int32_t plateau_patience = 5;
  std::int32_t stale_checks = 0;
};

struct CheckpointTensor {
  std::string name;
  bool trainable = false;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> first_moment;   // trainable tensors only
  std::vector<double> second_moment;  // trainable tensors only
};

struct Checkpoint {
  CheckpointInfo info;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace detail {

constexpr char kCheckpointMagic[6] = {'S', 'G', 'C', 'K', '1', '\n'};
constexpr std::uint16_t kCheckpointVersion = 1;

class BinWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void f64_array(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  std::vector<char> bytes_;
};

class BinReader {
 public:
  BinReader(std::vector<char> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16() { return fixed<std::uint16_t>(); }
  std::uint32_t u32() { return fixed<std::uint32_t>(); }
  std::uint64_t u64() { return fixed<std::uint64_t>(); }
  std::int32_t i32() { return fixed<std::int32_t>(); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string text() {
    const auto n = u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> f64_array(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  bool exhausted() const { return pos_ == bytes_.size(); }
  const std::string& path() const { return path_; }

 private:
  template <typename T>
  T fixed() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw DataError("truncated checkpoint: " + path_);
  }
  std::vector<char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::uint8_t pack_flags(const AblationFlags& f) {
  std::uint8_t bits = 0;
  if (f.no_gcn) bits |= 1u << 0;
  if (f.no_skip) bits |= 1u << 1;
  if (f.shape_loss_only) bits |= 1u << 2;
  if (f.box_loss_only) bits |= 1u << 3;
  if (f.no_pretrain) bits |= 1u << 4;
  return bits;
}

inline AblationFlags unpack_flags(std::uint8_t bits,
                                  const std::string& path) {
  if (bits >> 5)
    throw DataError("unknown ablation flag bits in checkpoint: " + path);
  AblationFlags f;
  f.no_gcn = bits & (1u << 0);
  f.no_skip = bits & (1u << 1);
  f.shape_loss_only = bits & (1u << 2);
  f.box_loss_only = bits & (1u << 3);
  f.no_pretrain = bits & (1u << 4);
  return f;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ck, const std::string& path) {
  detail::BinWriter w;
  for (char c : detail::kCheckpointMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(detail::kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(ck.info.mode));
  w.u8(detail::pack_flags(ck.info.ablation));
  w.u16(0);
  w.u32(ck.info.epoch);

  const auto& m = ck.info.model;
  for (int v : {m.num_classes, m.num_predicates, m.feature_dim,
                m.box_feature_dim, m.encoder_layers, m.decoder_layers,
                m.angle_bins, m.shape_code_dim, m.codec_points})
    w.u32(static_cast<std::uint32_t>(v));
  w.u64(m.codec_seed);
  w.u64(ck.info.rng_state);

  w.f64(ck.info.learning_rate);
  w.f64(ck.info.beta1);
  w.f64(ck.info.beta2);
  w.f64(ck.info.adam_eps);
  w.f64(ck.info.plateau_factor);
  w.f64(ck.info.best_monitored);
  w.u64(ck.info.step_count);
  w.i32(ck.info.plateau_patience);
  w.i32(ck.info.stale_checks);

  w.u64(ck.tensors.size());
  for (const auto& t : ck.tensors) {
    w.text(t.name);
    w.u8(t.trainable ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    w.u16(0);
    std::size_t numel = 1;
    for (auto d : t.shape) {
      w.u64(d);
      numel *= d;
    }
    if (t.values.size() != numel)
      throw ContractError("checkpoint tensor '" + t.name +
                          "' has inconsistent shape");
    w.f64_array(t.values);
    if (t.trainable) {
      if (t.first_moment.size() != numel || t.second_moment.size() != numel)
        throw ContractError("checkpoint tensor '" + t.name +
                            "' has inconsistent moments");
      w.f64_array(t.first_moment);
      w.f64_array(t.second_moment);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(w.bytes().data(),
            static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  detail::BinReader r(std::move(bytes), path);

  for (char expected : detail::kCheckpointMagic)
    if (static_cast<char>(r.u8()) != expected)
      throw DataError("not a checkpoint file (bad magic): " + path);
  if (r.u16() != detail::kCheckpointVersion)
    throw DataError("unsupported checkpoint version: " + path);

  Checkpoint ck;
  const auto mode = r.u8();
  if (mode > 1) throw DataError("unknown train mode in checkpoint: " + path);
  ck.info.mode = static_cast<TrainMode>(mode);
  ck.info.ablation = detail::unpack_flags(r.u8(), path);
  r.u16();
  ck.info.epoch = r.u32();

  auto& m = ck.info.model;
  for (int* field : {&m.num_classes, &m.num_predicates, &m.feature_dim,
                     &m.box_feature_dim, &m.encoder_layers, &m.decoder_layers,
                     &m.angle_bins, &m.shape_code_dim, &m.codec_points})
    *field = static_cast<int>(r.u32());
  m.codec_seed = r.u64();
  ck.info.rng_state = r.u64();

  ck.info.learning_rate = r.f64();
  ck.info.beta1 = r.f64();
  ck.info.beta2 = r.f64();
  ck.info.adam_eps = r.f64();
  ck.info.plateau_factor = r.f64();
  ck.info.best_monitored = r.f64();
  ck.info.step_count = r.u64();
  ck.info.plateau_patience = r.i32();
  ck.info.stale_checks = r.i32();

  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.text();
    t.trainable = r.u8() != 0;
    const auto ndim = r.u8();
    r.u16();
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      t.shape.push_back(static_cast<std::size_t>(r.u64()));
      numel *= t.shape.back();
    }
    t.values = r.f64_array(numel);
    if (t.trainable) {
      t.first_moment = r.f64_array(numel);
      t.second_moment = r.f64_array(numel);
    }
    ck.tensors.push_back(std::move(t));
  }
  if (!r.exhausted())
    throw DataError("trailing bytes after checkpoint payload: " + path);
  return ck;
}

/// Snapshot of the live training state. Tensor order follows the store's
/// registration order, so identical runs serialize identical bytes.
inline Checkpoint make_checkpoint(const CheckpointInfo& info,
                                  const ParameterStore& store,
                                  const AdamOptimizer* opt) {
  Checkpoint ck;
  ck.info = info;
  if (opt) {
    ck.info.learning_rate = opt->learning_rate();
    ck.info.beta1 = opt->config().beta1;
    ck.info.beta2 = opt->config().beta2;
    ck.info.adam_eps = opt->config().eps;
    ck.info.plateau_factor = opt->config().plateau_factor;
    ck.info.best_monitored = opt->best_monitored();
    ck.info.step_count = opt->step_count();
    ck.info.plateau_patience = opt->config().plateau_patience;
    ck.info.stale_checks = opt->stale_checks();
  }
  // The optimizer may own only a subset of the store (pathways an
  // ablation disconnects carry zero moments).
  std::unordered_map<const Tensor*, std::size_t> opt_index;
  if (opt)
    for (std::size_t k = 0; k < opt->params().size(); ++k)
      opt_index.emplace(opt->params()[k].get(), k);

  for (const auto& t : store.tensors()) {
    CheckpointTensor entry;
    entry.name = t->name;
    entry.trainable = t->requires_grad;
    entry.shape = t->shape;
    entry.values = t->values;
    if (t->requires_grad) {
      auto it = opt_index.find(t.get());
      if (it != opt_index.end()) {
        entry.first_moment = opt->first_moment(it->second);
        entry.second_moment = opt->second_moment(it->second);
      } else {
        entry.first_moment.assign(t->values.size(), 0.0);
        entry.second_moment.assign(t->values.size(), 0.0);
      }
    }
    ck.tensors.push_back(std::move(entry));
  }
  return ck;
}

namespace detail {

inline bool has_prefix(const std::string& name,
                       const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes)
    if (name.size() >= p.size() && name.compare(0, p.size(), p) == 0)
      return true;
  return false;
}

}  // namespace detail

/// Copies checkpoint tensors into `store` by name. Tensors matching a
/// skip prefix are ignored on both sides and the skipped checkpoint
/// entries are returned (e.g. decoder weights dropped for fine-tuning).
/// Any other mismatch is an error naming the offending tensor.
inline std::vector<std::string> apply_checkpoint(
    const Checkpoint& ck, ParameterStore& store,
    const std::vector<std::string>& skip_prefixes = {}) {
  std::vector<std::string> skipped;
  for (const auto& entry : ck.tensors) {
    if (detail::has_prefix(entry.name, skip_prefixes)) {
      skipped.push_back(entry.name);
      continue;
    }
    auto target = store.find(entry.name);
    if (!target)
      throw DataError("checkpoint tensor '" + entry.name +
                      "' has no counterpart in the model");
    if (target->shape != entry.shape)
      throw DataError("checkpoint tensor '" + entry.name +
                      "' has mismatched dimensions");
    target->values = entry.values;
  }
  for (const auto& t : store.tensors()) {
    if (detail::has_prefix(t->name, skip_prefixes)) continue;
    if (!ck.find(t->name))
      throw DataError("model tensor '" + t->name +
                      "' is missing from the checkpoint");
  }
  return skipped;
}

/// Restores optimizer moments and scheduler state saved by
/// make_checkpoint. The optimizer must already own the same trainable
/// tensors (same names, same order).
inline void restore_optimizer(const Checkpoint& ck, AdamOptimizer& opt) {
  opt.set_learning_rate(ck.info.learning_rate);
  opt.set_step_count(ck.info.step_count);
  opt.set_best_monitored(ck.info.best_monitored);
  opt.set_stale_checks(ck.info.stale_checks);
  for (std::size_t k = 0; k < opt.params().size(); ++k) {
    const auto& p = opt.params()[k];
    const auto* entry = ck.find(p->name);
    if (!entry || !entry->trainable)
      throw DataError("checkpoint has no optimizer state for '" + p->name +
                      "'");
    if (entry->first_moment.size() != p->values.size())
      throw DataError("checkpoint tensor '" + p->name +
                      "' has mismatched dimensions");
    opt.first_moment(k) = entry->first_moment;
    opt.second_moment(k) = entry->second_moment;
  }
}

}  // namespace sgae
