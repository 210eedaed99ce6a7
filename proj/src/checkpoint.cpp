#include "gemvpc/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace gemvpc {

namespace {

constexpr char kMagic[4] = {'G', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), (std::streamsize)s.size());
}

void put_mat(std::ostream& os, const nn::Mat& m) {
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u64(os, bits);
    }
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ValidationError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw ValidationError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& is) {
  std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw ValidationError("checkpoint truncated");
  return s;
}

nn::Mat get_mat(std::istream& is) {
  std::uint32_t rows = get_u32(is), cols = get_u32(is);
  nn::Mat m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) {
      std::uint64_t bits = get_u64(is);
      double v;
      std::memcpy(&v, &bits, 8);
      m(r, c) = v;
    }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const CaptionModel& model,
                     std::uint64_t vocab_hash, const nn::AdamW* opt) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + tmp);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_string(os, model.config().to_json());
    put_u64(os, vocab_hash);
    const auto& params = model.params().items();
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, p] : params) {
      put_string(os, name);
      put_mat(os, p.value());
    }
    if (opt) {
      put_u64(os, static_cast<std::uint64_t>(opt->step_count()));
      const auto& state = const_cast<nn::AdamW*>(opt)->state();
      put_u32(os, static_cast<std::uint32_t>(state.size()));
      for (const auto& [name, slot] : state) {
        put_string(os, name);
        put_mat(os, slot.m);
        put_mat(os, slot.v);
      }
    } else {
      put_u64(os, 0);
      put_u32(os, 0);
    }
    if (!os) throw std::runtime_error("short write to checkpoint: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename checkpoint into place: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("not a checkpoint file: " + path);
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw ValidationError("checkpoint version mismatch: got " + std::to_string(version));
  Checkpoint ck;
  ck.config = ModelConfig::from_json(get_string(is));
  ck.vocab_hash = get_u64(is);
  std::uint32_t n = get_u32(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = get_string(is);
    ck.params[name] = get_mat(is);
  }
  ck.opt_step = static_cast<long>(get_u64(is));
  std::uint32_t ns = get_u32(is);
  for (std::uint32_t i = 0; i < ns; ++i) {
    std::string name = get_string(is);
    nn::Mat m = get_mat(is);
    nn::Mat v = get_mat(is);
    ck.opt_state[name] = {std::move(m), std::move(v)};
  }
  return ck;
}

void apply_checkpoint(const Checkpoint& ck, CaptionModel& model, nn::AdamW* opt) {
  const auto& params = model.params().items();
  if (params.size() != ck.params.size())
    throw ValidationError("checkpoint parameter count mismatch");
  for (const auto& [name, p] : params) {
    auto it = ck.params.find(name);
    if (it == ck.params.end())
      throw ValidationError("checkpoint missing parameter: " + name);
    if (it->second.rows() != p.rows() || it->second.cols() != p.cols())
      throw ValidationError("checkpoint shape mismatch for " + name);
    p.node()->value = it->second;
  }
  if (opt) {
    opt->set_step_count(ck.opt_step);
    opt->state().clear();
    for (const auto& [name, mv] : ck.opt_state)
      opt->state()[name] = {mv.first, mv.second};
  }
}

CaptionModel model_from_checkpoint(const Checkpoint& ck) {
  CaptionModel model(ck.config, 0);
  apply_checkpoint(ck, model);
  return model;
}

}  // namespace gemvpc
