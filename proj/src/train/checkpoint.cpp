#include "csagan/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "csagan/core/rng.hpp"
#include "csagan/util/atomic_file.hpp"

namespace csagan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[4] = {'C', 'S', 'C', 'K'};

uint64_t fnv(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<uint64_t>(s.size());
    out_.append(s);
  }
  void doubles(std::span<const double> v) {
    pod<uint64_t>(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const uint64_t n = pod<uint64_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const uint64_t n = pod<uint64_t>();
    if (n > (in_.size() - pos_) / sizeof(double)) throw CheckpointError("checkpoint truncated");
    std::vector<double> v(n);
    std::memcpy(v.data(), in_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  size_t pos() const { return pos_; }

 private:
  void need(uint64_t n) const {
    if (n > in_.size() - pos_) throw CheckpointError("checkpoint truncated");
  }
  std::string_view in_;
  size_t pos_ = 0;
};

void write_adam(Writer& w, const Adam& opt) {
  w.pod<uint32_t>(static_cast<uint32_t>(opt.states().size()));
  for (const auto& [name, st] : opt.states()) {
    w.str(name);
    w.pod<int64_t>(st.t);
    w.doubles(st.m);
    w.doubles(st.v);
  }
}

std::map<std::string, AdamBlob> read_adam(Reader& r) {
  std::map<std::string, AdamBlob> out;
  const uint32_t n = r.pod<uint32_t>();
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    AdamBlob b;
    b.t = r.pod<int64_t>();
    b.m = r.doubles();
    b.v = r.doubles();
    out.emplace(std::move(name), std::move(b));
  }
  return out;
}

ParameterSet all_parameters(TrainingState& state) {
  ParameterSet set = state.generator->parameters();
  set.append(state.discriminator->parameters());
  return set;
}

}  // namespace

std::string encode_checkpoint(TrainingState& state) {
  Writer w;
  w.bytes().append(kMagic, 4);
  w.pod<uint32_t>(kCheckpointVersion);
  w.str(state.config_text);
  w.pod<int32_t>(state.stage);
  w.pod<int32_t>(state.epoch);
  w.pod<int64_t>(state.batch_in_epoch);
  w.pod<int64_t>(state.step);
  w.pod<uint64_t>(state.seed);
  w.pod<uint8_t>(state.halted ? 1 : 0);
  ParameterSet set = all_parameters(state);
  w.pod<uint32_t>(static_cast<uint32_t>(set.parameters.size()));
  for (const auto& p : set.parameters) {
    w.str(p.name);
    w.doubles(p.tensor.data());
  }
  w.pod<uint32_t>(static_cast<uint32_t>(set.spectral.size()));
  for (const auto& s : set.spectral) {
    w.str(s.name);
    w.doubles(s.state->u);
  }
  write_adam(w, state.opt_g);
  write_adam(w, state.opt_d);
  const uint64_t sum = fnv(w.bytes());
  w.pod<uint64_t>(sum);
  return std::move(w.bytes());
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic or too short)");
  }
  Reader r(bytes);
  r.pod<uint32_t>();  // magic
  const uint32_t version = r.pod<uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (stored != fnv(std::string_view(bytes).substr(0, bytes.size() - 8))) {
    throw CheckpointError("checkpoint checksum mismatch (truncated or corrupted)");
  }
  Reader body(std::string_view(bytes).substr(0, bytes.size() - 8));
  body.pod<uint32_t>();
  body.pod<uint32_t>();
  CheckpointData d;
  d.config_text = body.str();
  d.stage = body.pod<int32_t>();
  d.epoch = body.pod<int32_t>();
  d.batch_in_epoch = body.pod<int64_t>();
  d.step = body.pod<int64_t>();
  d.seed = body.pod<uint64_t>();
  d.halted = body.pod<uint8_t>() != 0;
  const uint32_t n_params = body.pod<uint32_t>();
  for (uint32_t i = 0; i < n_params; ++i) {
    std::string name = body.str();
    d.parameters.emplace(std::move(name), body.doubles());
  }
  const uint32_t n_spectral = body.pod<uint32_t>();
  for (uint32_t i = 0; i < n_spectral; ++i) {
    std::string name = body.str();
    d.spectral.emplace(std::move(name), body.doubles());
  }
  d.adam_g = read_adam(body);
  d.adam_d = read_adam(body);
  if (body.pos() != bytes.size() - 8) throw CheckpointError("checkpoint has trailing data");
  return d;
}

void save_checkpoint(const std::filesystem::path& path, TrainingState& state) {
  write_file_atomic(path, encode_checkpoint(state));
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

void apply_checkpoint(const CheckpointData& data, TrainingState& state) {
  ParameterSet set = all_parameters(state);
  if (data.parameters.size() != set.parameters.size() ||
      data.spectral.size() != set.spectral.size()) {
    throw CheckpointError("checkpoint does not match the model: parameter counts differ");
  }
  for (const auto& p : set.parameters) {
    auto it = data.parameters.find(p.name);
    if (it == data.parameters.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
    if (it->second.size() != p.tensor.data().size()) {
      throw CheckpointError("checkpoint parameter " + p.name + " has the wrong size");
    }
  }
  for (const auto& s : set.spectral) {
    auto it = data.spectral.find(s.name);
    if (it == data.spectral.end() || it->second.size() != s.state->u.size()) {
      throw CheckpointError("checkpoint spectral vector " + s.name + " missing or mis-sized");
    }
  }
  for (const auto* opt : {&data.adam_g, &data.adam_d}) {
    for (const auto& [name, blob] : *opt) {
      auto it = data.parameters.find(name);
      if (it == data.parameters.end() || blob.m.size() != it->second.size() ||
          blob.v.size() != it->second.size()) {
        throw CheckpointError("checkpoint optimizer state " + name + " does not match a parameter");
      }
    }
  }

  for (const auto& p : set.parameters) {
    Tensor t = p.tensor;
    const auto& src = data.parameters.at(p.name);
    std::copy(src.begin(), src.end(), t.mutable_data().begin());
  }
  for (const auto& s : set.spectral) s.state->u = data.spectral.at(s.name);
  auto restore = [](Adam& opt, const std::map<std::string, AdamBlob>& blobs) {
    opt.states().clear();
    for (const auto& [name, blob] : blobs) {
      AdamState st = AdamState::for_size(blob.m.size());
      st.t = blob.t;
      st.m = blob.m;
      st.v = blob.v;
      opt.states().emplace(name, std::move(st));
    }
  };
  restore(state.opt_g, data.adam_g);
  restore(state.opt_d, data.adam_d);
  state.config_text = data.config_text;
  state.stage = data.stage;
  state.epoch = data.epoch;
  state.batch_in_epoch = data.batch_in_epoch;
  state.step = data.step;
  state.seed = data.seed;
  state.halted = data.halted;
}

}  // namespace csagan
