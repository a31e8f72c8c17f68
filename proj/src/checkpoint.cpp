#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "leap/checkpoint.hpp"

namespace leap {

namespace {

constexpr char kMagic[8] = {'L', 'E', 'A', 'P', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }
void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_str(std::istream& in) {
  const uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

nlohmann::json config_json(const LeapConfig& c) {
  return {
      {"hidden", c.hidden},
      {"emb_dim", c.emb_dim},
      {"rev_hidden", c.rev_hidden},
      {"mlp_hidden", c.mlp_hidden},
      {"kernel_widths", c.kernel_widths},
      {"filters_per_width", c.filters_per_width},
      {"num_classes", c.num_classes},
      {"vocab_size", c.vocab_size},
      {"skip_pathway", c.skip_pathway},
      {"use_cnn", c.use_cnn},
      {"use_rnn_r", c.use_rnn_r},
      {"use_follow", c.use_follow},
      {"use_preceding", c.use_preceding},
      {"use_current", c.use_current},
  };
}

LeapConfig config_from_json(const nlohmann::json& j) {
  LeapConfig c;
  c.hidden = j.at("hidden");
  c.emb_dim = j.at("emb_dim");
  c.rev_hidden = j.at("rev_hidden");
  c.mlp_hidden = j.at("mlp_hidden");
  c.kernel_widths = j.at("kernel_widths").get<std::vector<int>>();
  c.filters_per_width = j.at("filters_per_width");
  c.num_classes = j.at("num_classes");
  c.vocab_size = j.at("vocab_size");
  c.skip_pathway = j.at("skip_pathway");
  c.use_cnn = j.at("use_cnn");
  c.use_rnn_r = j.at("use_rnn_r");
  c.use_follow = j.at("use_follow");
  c.use_preceding = j.at("use_preceding");
  c.use_current = j.at("use_current");
  return c;
}

// Expected shape of each named tensor given the config; used to validate on
// load.
bool expected_shape(const LeapConfig& c, const std::string& name, std::array<int, 3>& dim,
                    int& rank) {
  auto set2 = [&](int a, int b) { rank = 2; dim = {a, b, 1}; };
  auto set1 = [&](int a) { rank = 1; dim = {a, 1, 1}; };
  if (name == "embedding") { set2(c.vocab_size, c.emb_dim); return true; }
  if (name == "lstm_w") { set2(4 * c.hidden, c.emb_dim + c.hidden); return true; }
  if (name == "lstm_b") { set1(4 * c.hidden); return true; }
  if (name == "cls_w") { set2(c.num_classes, c.hidden); return true; }
  if (!c.skip_pathway) return false;
  if (name == "rev_w") { set2(4 * c.rev_hidden, c.emb_dim + c.rev_hidden); return true; }
  if (name == "rev_b") { set1(4 * c.rev_hidden); return true; }
  if (name == "mlp_w1") { set2(c.mlp_hidden, c.mlp_in_dim()); return true; }
  if (name == "mlp_b1") { set1(c.mlp_hidden); return true; }
  if (name == "mlp_w2") { set2(2, c.mlp_hidden); return true; }
  if (name == "mlp_b2") { set1(2); return true; }
  if (name == "h_end") { set1(c.follow_dim()); return true; }
  for (int w : c.kernel_widths) {
    if (name == "conv_w" + std::to_string(w)) {
      rank = 3;
      dim = {w, c.emb_dim, c.filters_per_width};
      return true;
    }
    if (name == "conv_b" + std::to_string(w)) { set1(c.filters_per_width); return true; }
  }
  return false;
}

}  // namespace

void save_checkpoint(const std::string& path, const LeapConfig& cfg,
                     const LeapParams& params, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_str(out, config_json(cfg).dump());

  write_u64(out, vocab.tokens().size());
  for (const std::string& tok : vocab.tokens()) write_str(out, tok);

  uint32_t count = 0;
  params.for_each([&](const std::string&, const Tensor&) { ++count; });
  write_u32(out, count);
  params.for_each([&](const std::string& name, const Tensor& t) {
    write_str(out, name);
    write_u32(out, static_cast<uint32_t>(t.rank));
    for (int i = 0; i < t.rank; ++i) write_u32(out, static_cast<uint32_t>(t.dim[i]));
    write_u64(out, static_cast<uint64_t>(t.numel()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(real)));
  });
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported format version " +
                             std::to_string(version));

  Checkpoint ck;
  ck.config = config_from_json(nlohmann::json::parse(read_str(in)));

  const uint64_t vocab_n = read_u64(in);
  for (uint64_t i = 0; i < vocab_n; ++i) {
    const std::string tok = read_str(in);
    if (i > 1) ck.vocab.add(tok);  // PAD/UNK are fixed by construction
  }
  if (ck.vocab.size() != ck.config.vocab_size)
    throw std::runtime_error("load_checkpoint: vocabulary size " +
                             std::to_string(ck.vocab.size()) + " disagrees with config " +
                             std::to_string(ck.config.vocab_size));

  const uint32_t count = read_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = read_str(in);
    const uint32_t rank = read_u32(in);
    if (rank < 1 || rank > 3)
      throw std::runtime_error("load_checkpoint: bad rank for tensor " + name);
    std::array<int, 3> dim{1, 1, 1};
    long n = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      dim[r] = static_cast<int>(read_u32(in));
      n *= dim[r];
    }
    const uint64_t stored = read_u64(in);
    if (static_cast<long>(stored) != n)
      throw std::runtime_error("load_checkpoint: element count mismatch for " + name);

    std::array<int, 3> want_dim{1, 1, 1};
    int want_rank = 0;
    if (!expected_shape(ck.config, name, want_dim, want_rank))
      throw std::runtime_error("load_checkpoint: unexpected tensor " + name);
    if (want_rank != static_cast<int>(rank) || want_dim != dim)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);

    Tensor t;
    t.rank = static_cast<int>(rank);
    t.dim = dim;
    t.v.resize(n);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(n * sizeof(real)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated tensor " + name);

    if (name == "embedding") ck.params.embedding = std::move(t);
    else if (name == "lstm_w") ck.params.lstm_w = std::move(t);
    else if (name == "lstm_b") ck.params.lstm_b = std::move(t);
    else if (name == "rev_w") ck.params.rev_w = std::move(t);
    else if (name == "rev_b") ck.params.rev_b = std::move(t);
    else if (name == "mlp_w1") ck.params.mlp_w1 = std::move(t);
    else if (name == "mlp_b1") ck.params.mlp_b1 = std::move(t);
    else if (name == "mlp_w2") ck.params.mlp_w2 = std::move(t);
    else if (name == "mlp_b2") ck.params.mlp_b2 = std::move(t);
    else if (name == "h_end") ck.params.h_end = std::move(t);
    else if (name == "cls_w") ck.params.cls_w = std::move(t);
    else if (name.rfind("conv_w", 0) == 0) ck.params.conv_w.push_back(std::move(t));
    else if (name.rfind("conv_b", 0) == 0) ck.params.conv_b.push_back(std::move(t));
  }

  // every expected tensor must be present
  std::vector<std::string> missing;
  LeapParams probe = ck.params;
  long have = 0;
  probe.for_each([&](const std::string&, Tensor&) { ++have; });
  if (have != count)
    throw std::runtime_error("load_checkpoint: tensor count mismatch");
  if (ck.params.embedding.empty() || ck.params.lstm_w.empty() || ck.params.cls_w.empty())
    throw std::runtime_error("load_checkpoint: core tensors missing");
  if (ck.config.skip_pathway &&
      (ck.params.mlp_w1.empty() || ck.params.h_end.empty() ||
       ck.params.conv_w.size() != ck.config.kernel_widths.size()))
    throw std::runtime_error("load_checkpoint: skip-pathway tensors missing");
  return ck;
}

}  // namespace leap
