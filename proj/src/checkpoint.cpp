// Copyright 2026 The simulst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "simulst/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "simulst/errors.hpp"

namespace simulst {

namespace {

constexpr std::string_view kMagic = "SIMULST-CHECKPOINT";

std::string dims_string(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) {
    bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  }
  return std::bit_cast<double>(bits);
}

void put_model(std::string& out, const std::string& prefix,
               const TransformerModel& model) {
  for (const auto& [name, t] : model.parameters()) {
    out += "param " + prefix + "." + name + " " + dims_string(t.shape()) + "\n";
    for (double v : t.values()) put_f64(out, v);
    out += '\n';
  }
}

// Sequential reader over the file contents.
class Cursor {
 public:
  explicit Cursor(std::string_view data) : data_(data) {}

  std::string_view line() {
    const auto end = data_.find('\n', pos_);
    if (end == std::string_view::npos) fail("unexpected end of file");
    auto out = data_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }
  const char* take(std::size_t bytes) {
    if (data_.size() - pos_ < bytes) fail("truncated parameter block");
    const char* p = data_.data() + pos_;
    pos_ += bytes;
    return p;
  }
  bool at_end() const { return pos_ >= data_.size(); }
  std::size_t position() const { return pos_; }
  [[noreturn]] static void fail(const std::string& what) {
    throw CheckpointError(what);
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    Cursor::fail("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

std::pair<std::string, std::string> split_kv(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    Cursor::fail("expected key=value, got '" + std::string(line) + "'");
  }
  return {std::string(line.substr(0, eq)), std::string(line.substr(eq + 1))};
}

Vocabulary read_vocab(Cursor& c, std::string_view key) {
  auto [k, v] = split_kv(c.line());
  if (k != key) Cursor::fail("expected " + std::string(key) + ", got " + k);
  const std::size_t n = parse_size(v, key);
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) words.emplace_back(c.line());
  try {
    return Vocabulary::from_words(std::move(words));
  } catch (const ConfigError& e) {
    Cursor::fail(e.what());
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path,
                     const TransformerModel& student,
                     const TransformerModel* teacher,
                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                     const std::map<std::string, std::string>& metadata) {
  const ModelConfig& c = student.config();
  if (teacher && !(teacher->config() == c)) {
    throw ContractError("teacher and student configs differ");
  }
  std::string out;
  out += std::string(kMagic) + "\n";
  out += "version=" + std::to_string(kCheckpointVersion) + "\n";
  out += "n_layers=" + std::to_string(c.n_layers) + "\n";
  out += "d_model=" + std::to_string(c.d_model) + "\n";
  out += "n_heads=" + std::to_string(c.n_heads) + "\n";
  out += "d_ff=" + std::to_string(c.d_ff) + "\n";
  out += "src_vocab_size=" + std::to_string(c.src_vocab) + "\n";
  out += "tgt_vocab_size=" + std::to_string(c.tgt_vocab) + "\n";
  out += "max_len=" + std::to_string(c.max_len) + "\n";
  out += "wait_k=" + std::to_string(c.wait_k) + "\n";
  out += "variant=" + std::string(variant_name(student.variant())) + "\n";
  out += std::string("teacher=") + (teacher ? "1" : "0") + "\n";
  for (const auto& [k, v] : metadata) {
    if (k.find_first_of("=\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw ContractError("metadata entry '" + k + "' is not a single line");
    }
    out += "meta." + k + "=" + v + "\n";
  }
  out += "src_vocab=" + std::to_string(src_vocab.size()) + "\n";
  for (const auto& w : src_vocab.words()) out += w + "\n";
  out += "tgt_vocab=" + std::to_string(tgt_vocab.size()) + "\n";
  for (const auto& w : tgt_vocab.words()) out += w + "\n";
  out += "end_header\n";
  put_model(out, "student", student);
  if (teacher) put_model(out, "teacher", *teacher);
  char sum[32];
  std::snprintf(sum, sizeof(sum), "checksum=%016llx\n",
                static_cast<unsigned long long>(fnv1a64(out)));
  out += sum;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());

  // Checksum line: the last line of the file.
  if (data.size() < 2 || data.back() != '\n') {
    Cursor::fail(path.string() + " is truncated");
  }
  const auto start = data.rfind('\n', data.size() - 2);
  const std::size_t sum_pos = start == std::string::npos ? 0 : start + 1;
  const std::string_view sum_line(data.data() + sum_pos,
                                  data.size() - 1 - sum_pos);
  if (!sum_line.starts_with("checksum=")) {
    Cursor::fail(path.string() + " has no checksum line");
  }
  char expect[17];
  std::snprintf(expect, sizeof(expect), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(std::string_view(data).substr(0, sum_pos))));
  if (sum_line.substr(9) != expect) {
    Cursor::fail(path.string() + " fails its checksum");
  }

  Cursor c(std::string_view(data).substr(0, sum_pos));
  if (c.line() != kMagic) Cursor::fail(path.string() + " is not a checkpoint");
  {
    auto [k, v] = split_kv(c.line());
    if (k != "version" || parse_size(v, "version") != kCheckpointVersion) {
      Cursor::fail("unsupported checkpoint version " + v);
    }
  }
  ModelConfig cfg;
  std::string variant;
  bool has_teacher = false;
  std::map<std::string, std::string> meta;
  const std::map<std::string, std::size_t*> fields = {
      {"n_layers", &cfg.n_layers},   {"d_model", &cfg.d_model},
      {"n_heads", &cfg.n_heads},     {"d_ff", &cfg.d_ff},
      {"src_vocab_size", &cfg.src_vocab}, {"tgt_vocab_size", &cfg.tgt_vocab},
      {"max_len", &cfg.max_len},     {"wait_k", &cfg.wait_k}};
  std::size_t seen = 0;
  std::string src_count;
  while (src_count.empty()) {
    auto [k, v] = split_kv(c.line());
    if (auto it = fields.find(k); it != fields.end()) {
      *it->second = parse_size(v, k);
      ++seen;
    } else if (k == "variant") {
      variant = v;
    } else if (k == "teacher") {
      has_teacher = v == "1";
    } else if (k.starts_with("meta.")) {
      meta[k.substr(5)] = v;
    } else if (k == "src_vocab") {
      src_count = v;
    } else {
      Cursor::fail("unknown header key '" + k + "'");
    }
  }
  std::vector<std::string> words(parse_size(src_count, "src_vocab"));
  for (auto& w : words) w = c.line();
  Vocabulary src;
  try {
    src = Vocabulary::from_words(std::move(words));
  } catch (const ConfigError& e) {
    Cursor::fail(e.what());
  }
  Vocabulary tgt = read_vocab(c, "tgt_vocab");
  if (c.line() != "end_header") Cursor::fail("missing end_header");
  if (seen != fields.size() || variant.empty()) {
    Cursor::fail("incomplete header in " + path.string());
  }
  ModelVariant mv = ModelVariant::teacher;
  try {
    cfg.validate();
    mv = parse_variant(variant);
  } catch (const ConfigError& e) {
    Cursor::fail(e.what());
  }

  Checkpoint ck{TransformerModel(cfg, mv, 0), std::nullopt, std::move(src),
                std::move(tgt), std::move(meta)};
  if (has_teacher) ck.teacher.emplace(cfg, ModelVariant::teacher, 0);
  std::map<std::string, Tensor> slots;
  for (auto& [name, t] : ck.student.parameters()) slots["student." + name] = t;
  if (ck.teacher) {
    for (auto& [name, t] : ck.teacher->parameters()) slots["teacher." + name] = t;
  }
  while (!c.at_end()) {
    const std::string head(c.line());
    std::istringstream hs(head);
    std::string tag, name, dims;
    if (!(hs >> tag >> name >> dims) || tag != "param") {
      Cursor::fail("bad parameter header '" + head + "'");
    }
    auto it = slots.find(name);
    if (it == slots.end()) Cursor::fail("unexpected parameter " + name);
    Tensor& t = it->second;
    if (dims != dims_string(t.shape())) {
      Cursor::fail("parameter " + name + " has shape " + dims + ", expected " +
                   dims_string(t.shape()));
    }
    const char* p = c.take(t.numel() * 8);
    auto out = t.mutable_values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f64(p + 8 * i);
    if (!c.line().empty()) Cursor::fail("parameter " + name + " overruns");
    slots.erase(it);
  }
  if (!slots.empty()) Cursor::fail("missing parameter " + slots.begin()->first);
  return ck;
}

}  // namespace simulst
