// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unistd.h>

#include "molfusion/fingerprint.hpp"
#include "molfusion/random.hpp"

namespace molfusion::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw std::invalid_argument("not a number");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("not a boolean");
}

std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

using Setter = std::function<void(RunConfig&, const std::string&, const fs::path&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string name;
  Setter set;
  Getter get;
};

template <typename T>
Key number_key(std::string name, T RunConfig::*, T fusion::FusionConfig::*) = delete;

const std::vector<Key>& keys() {
  using R = RunConfig;
  const auto size_key = [](std::string name, auto getter) {
    return Key{name, [getter](R& c, const std::string& v, const fs::path&) { getter(c) = parse_number<std::size_t>(v); },
               [getter](const R& c) { return std::to_string(getter(const_cast<R&>(c))); }};
  };
  const auto real_key = [](std::string name, auto getter) {
    return Key{name, [getter](R& c, const std::string& v, const fs::path&) { getter(c) = parse_number<double>(v); },
               [getter](const R& c) { return fmt(getter(const_cast<R&>(c))); }};
  };
  static const std::vector<Key> table = {
      size_key("d_model", [](R& c) -> std::size_t& { return c.encoder.d_model; }),
      size_key("n_layers", [](R& c) -> std::size_t& { return c.encoder.n_layers; }),
      size_key("n_heads", [](R& c) -> std::size_t& { return c.encoder.n_heads; }),
      size_key("mp_rounds", [](R& c) -> std::size_t& { return c.encoder.mp_rounds; }),
      size_key("vocab_size", [](R& c) -> std::size_t& { return c.encoder.vocab_size; }),
      size_key("graph_d_model", [](R& c) -> std::size_t& { return c.encoder.graph_d_model; }),
      real_key("tau", [](R& c) -> double& { return c.fusion.tau; }),
      real_key("alpha", [](R& c) -> double& { return c.fusion.alpha; }),
      real_key("beta", [](R& c) -> double& { return c.fusion.beta; }),
      real_key("mask_rate", [](R& c) -> double& { return c.fusion.mask_rate; }),
      size_key("batch_size", [](R& c) -> std::size_t& { return c.fusion.batch_size; }),
      size_key("epochs", [](R& c) -> std::size_t& { return c.fusion.epochs; }),
      real_key("lr", [](R& c) -> double& { return c.fusion.lr; }),
      Key{"seed", [](R& c, const std::string& v, const fs::path&) { c.fusion.seed = parse_number<std::uint64_t>(v); },
          [](const R& c) { return std::to_string(c.fusion.seed); }},
      size_key("patience", [](R& c) -> std::size_t& { return c.fusion.patience; }),
      Key{"restore_best", [](R& c, const std::string& v, const fs::path&) { c.fusion.restore_best = parse_bool(v); },
          [](const R& c) { return std::string(c.fusion.restore_best ? "true" : "false"); }},
      size_key("d_shared", [](R& c) -> std::size_t& { return c.fusion.d_shared; }),
      Key{"molecular_objective",
          [](R& c, const std::string& v, const fs::path&) { c.fusion.molecular = fusion::parse_molecular_objective(v); },
          [](const R& c) { return std::string(fusion::to_string(c.fusion.molecular)); }},
      Key{"atomic_objective",
          [](R& c, const std::string& v, const fs::path&) { c.fusion.atomic = fusion::parse_atomic_objective(v); },
          [](const R& c) { return std::string(fusion::to_string(c.fusion.atomic)); }},
      real_key("molsim_weight", [](R& c) -> double& { return c.fusion.molsim_weight; }),
      Key{"unmask_head",
          [](R& c, const std::string& v, const fs::path&) { c.fusion.unmask_head = fusion::parse_unmask_head(v); },
          [](const R& c) { return std::string(fusion::to_string(c.fusion.unmask_head)); }},
      Key{"fp_radius", [](R& c, const std::string& v, const fs::path&) { c.fusion.fp_radius = parse_number<int>(v); },
          [](const R& c) { return std::to_string(c.fusion.fp_radius); }},
      size_key("fp_bits", [](R& c) -> std::size_t& { return c.fusion.fp_bits; }),
      Key{"corpus_path", [](R& c, const std::string& v, const fs::path& b) { c.corpus_path = resolve(v, b); },
          [](const R& c) { return c.corpus_path; }},
      Key{"dataset_paths",
          [](R& c, const std::string& v, const fs::path& b) {
            c.dataset_paths.clear();
            for (const auto& p : split_list(v)) c.dataset_paths.push_back(resolve(p, b));
          },
          [](const R& c) {
            std::string s;
            for (const auto& p : c.dataset_paths) s += (s.empty() ? "" : ",") + p;
            return s;
          }},
      Key{"output_dir", [](R& c, const std::string& v, const fs::path& b) { c.output_dir = resolve(v, b); },
          [](const R& c) { return c.output_dir; }},
      Key{"seeds",
          [](R& c, const std::string& v, const fs::path&) {
            c.seeds.clear();
            for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>(s));
          },
          [](const R& c) {
            std::string s;
            for (auto v : c.seeds) s += (s.empty() ? "" : ",") + std::to_string(v);
            return s;
          }},
      Key{"aggregations",
          [](R& c, const std::string& v, const fs::path&) {
            c.aggregations.clear();
            for (const auto& s : split_list(v)) c.aggregations.push_back(downstream::parse_aggregation(s));
          },
          [](const R& c) {
            std::string s;
            for (auto a : c.aggregations) s += (s.empty() ? "" : ",") + std::string(downstream::to_string(a));
            return s;
          }},
      Key{"ablation", [](R& c, const std::string& v, const fs::path&) { c.ablation = parse_bool(v); },
          [](const R& c) { return std::string(c.ablation ? "true" : "false"); }},
  };
  return table;
}

void validate(const RunConfig& cfg) {
  try {
    auto e = cfg.encoder;
    if (e.vocab_size == 0) e.vocab_size = enc::Vocabulary::kUnk + 1;
    e.validate();
    cfg.fusion.validate();
    if (cfg.fusion.atomic == fusion::AtomicObjective::AtomAlign && e.graph_width() != e.d_model) {
      throw ConfigError("atomic_objective = atomalign requires graph_d_model = 0 or d_model");
    }
  } catch (const enc::InvalidConfig& ex) {
    throw ConfigError(ex.what());
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (cfg.aggregations.empty()) throw ConfigError("aggregations must not be empty");
}

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes_.append(s);
  }
  void raw(std::string_view s) { bytes_.append(s); }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw CheckpointError("checkpoint is truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

RunConfig parse_config(std::string_view text, const fs::path& base_dir) {
  RunConfig cfg;
  std::map<std::string, const Key*> index;
  for (const auto& k : keys()) index[k.name] = &k;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.resize(i);
        break;
      }
    }
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + content + "'");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    try {
      it->second->set(cfg, value, base_dir);
    } catch (const std::exception& ex) {
      throw ConfigError(where + ": invalid value '" + value + "' for " + key + " (" + ex.what() + ")");
    }
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& ex) {
    throw ConfigError(ex.what());
  }
  return parse_config(text, path.parent_path());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::vector<std::string> read_corpus(const fs::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> out;
  std::optional<std::size_t> column;
  bool first = true;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (first) {
      first = false;
      const auto cells = split_list(t);
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "smiles") column = i;
      }
      if (column) continue;
    }
    if (column) {
      std::vector<std::string> cells;
      std::stringstream ss(t);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
      if (*column < cells.size() && !cells[*column].empty()) out.push_back(cells[*column]);
    } else {
      out.push_back(t.substr(0, t.find_first_of(" \t")));
    }
  }
  if (out.empty()) throw DataError("corpus " + path.string() + " contains no SMILES");
  return out;
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string encode_checkpoint(const fusion::FusionModel& model, const RunConfig& cfg) {
  RunConfig snapshot = cfg;
  snapshot.encoder = model.encoder_config();
  snapshot.fusion = model.config();
  Writer w;
  w.raw(kCheckpointMagic);
  w.raw("\n");
  w.str(serialize_config(snapshot));
  const auto& vocab = model.vocabulary();
  w.u64(vocab.tokens().size());
  for (const auto& t : vocab.tokens()) w.str(t);
  w.u64(vocab.atom_types().size());
  for (const auto& t : vocab.atom_types()) w.str(t);
  const auto& params = model.store().parameters();
  w.u64(params.size());
  for (const auto& p : params) {
    w.str(p.name);
    w.u64(p.tensor.rows());
    w.u64(p.tensor.cols());
    for (double v : p.tensor.values()) w.f64(v);
  }
  const std::uint64_t checksum = fnv1a64(w.bytes());
  w.u64(checksum);
  return std::move(w.bytes());
}

LoadedCheckpoint decode_checkpoint(std::string_view bytes) {
  const std::string header = std::string(kCheckpointMagic) + "\n";
  if (bytes.substr(0, header.size()) != header) throw CheckpointError("not a MOLFUSION-CKPT-v1 checkpoint");
  if (bytes.size() < header.size() + 8) throw CheckpointError("checkpoint is truncated");
  const auto body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != fnv1a64(body)) throw CheckpointError("checkpoint checksum mismatch");

  Reader r(body);
  r.raw(header.size());
  RunConfig cfg;
  try {
    cfg = parse_config(r.str());
  } catch (const ConfigError& ex) {
    throw CheckpointError(std::string("embedded config: ") + ex.what());
  }
  std::vector<std::string> tokens(r.u64());
  for (auto& t : tokens) t = r.str();
  std::vector<std::string> atom_types(r.u64());
  for (auto& t : atom_types) t = r.str();

  std::optional<fusion::FusionModel> model;
  try {
    model.emplace(cfg.encoder, cfg.fusion, enc::Vocabulary::from_lists(std::move(tokens), std::move(atom_types)));
  } catch (const enc::InvalidConfig& ex) {
    throw CheckpointError(std::string("checkpoint does not describe a valid model: ") + ex.what());
  }
  auto& params = model->store().parameters();
  const auto count = r.u64();
  if (count != params.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " parameter blocks, model expects " +
                          std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name = r.str();
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (name != p.name || rows != p.tensor.rows() || cols != p.tensor.cols()) {
      throw CheckpointError("parameter block '" + name + "' (" + std::to_string(rows) + "x" + std::to_string(cols) +
                            ") does not match '" + p.name + "'");
    }
    for (double& v : p.tensor.mutable_values()) v = r.f64();
  }
  if (!r.done()) throw CheckpointError("trailing bytes after parameter blocks");
  return LoadedCheckpoint{std::move(cfg), std::move(*model)};
}

void save_checkpoint(const fs::path& path, const fusion::FusionModel& model, const RunConfig& cfg) {
  write_file_atomic(path, encode_checkpoint(model, cfg));
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const DataError& ex) {
    throw CheckpointError(ex.what());
  }
  return decode_checkpoint(bytes);
}

std::string format_epoch(const fusion::EpochRecord& rec) {
  std::string s = "epoch=" + std::to_string(rec.epoch) + " train_loss=" + fmt(rec.train_loss) +
                  " valid_loss=" + fmt(rec.valid_loss);
  if (rec.molecular) s += " molecular=" + fmt(*rec.molecular);
  if (rec.mask) s += " mask=" + fmt(*rec.mask);
  if (rec.unmask) s += " unmask=" + fmt(*rec.unmask);
  s += std::string(" improved=") + (rec.improved ? "1" : "0");
  return s;
}

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

class Emitter {
 public:
  Emitter(const Globals& g, std::ostream& out) : path_(g.out), out_(out) {}
  void operator()(const std::string& text) const {
    if (path_.empty()) {
      out_ << text;
    } else {
      write_file_atomic(path_, text);
    }
  }

 private:
  std::string path_;
  std::ostream& out_;
};

RunConfig config_from(const Globals& g, bool required) {
  if (g.config.empty()) {
    if (required) throw ConfigError("--config is required for this command");
    RunConfig cfg;
    if (g.seed) cfg.fusion.seed = *g.seed;
    return cfg;
  }
  RunConfig cfg = load_config(g.config);
  if (g.seed) cfg.fusion.seed = *g.seed;
  return cfg;
}

std::vector<std::string> load_corpus(const RunConfig& cfg) {
  if (cfg.corpus_path.empty()) throw ConfigError("corpus_path is not set");
  return read_corpus(cfg.corpus_path);
}

std::vector<downstream::TaskDataset> load_datasets(const RunConfig& cfg) {
  if (cfg.dataset_paths.empty()) throw ConfigError("dataset_paths is not set");
  std::vector<downstream::TaskDataset> out;
  for (const auto& p : cfg.dataset_paths) out.push_back(downstream::read_task_csv(p));
  return out;
}

std::string run_ablation(const RunConfig& cfg) {
  const auto corpus = load_corpus(cfg);
  const auto datasets = load_datasets(cfg);
  return downstream::ablation_grid(corpus, datasets, cfg.encoder, cfg.fusion, cfg.seeds).to_json() + "\n";
}

int cmd_pretrain(const Globals& g, std::ostream& out) {
  const RunConfig cfg = config_from(g, true);
  const auto corpus = load_corpus(cfg);
  auto model = fusion::build_model(corpus, cfg.encoder, cfg.fusion);
  if (cfg.encoder.vocab_size != 0 && cfg.encoder.vocab_size != model.vocabulary().size()) {
    throw ConfigError("vocab_size = " + std::to_string(cfg.encoder.vocab_size) + " but the corpus yields " +
                      std::to_string(model.vocabulary().size()) + " tokens");
  }
  std::string log;
  const auto result = fusion::train(model, corpus, [&](const fusion::EpochRecord& rec) {
    const auto line = format_epoch(rec);
    log += line + "\n";
    out << line << "\n";
  });
  const fs::path ckpt = g.out.empty() ? fs::path(cfg.output_dir) / "model.ckpt" : fs::path(g.out);
  fs::path log_path = ckpt;
  log_path.replace_extension(".log");
  const std::string summary = "done epochs=" + std::to_string(result.history.size()) +
                              " best_epoch=" + std::to_string(result.best_epoch) +
                              " optimizer_steps=" + std::to_string(result.optimizer_steps) +
                              " skipped_smiles=" + std::to_string(result.skipped_smiles) +
                              " initial_train_loss=" + fmt(result.initial_train_loss) +
                              " final_train_loss=" + fmt(result.final_train_loss);
  log += summary + "\n";
  save_checkpoint(ckpt, model, cfg);
  write_file_atomic(log_path, log);
  out << summary << " checkpoint=" << ckpt.string() << "\n";
  if (cfg.ablation) {
    const fs::path report = fs::path(cfg.output_dir) / "ablation.json";
    write_file_atomic(report, run_ablation(cfg));
    out << "ablation=" << report.string() << "\n";
  }
  return kExitOk;
}

int cmd_probe(const Globals& g, const std::string& ckpt_path, const std::string& dataset_path,
              const std::string& agg, const std::string& seeds_text, std::ostream& out) {
  const RunConfig base = config_from(g, false);
  auto ckpt = load_checkpoint(ckpt_path);
  std::vector<std::uint64_t> seeds = g.config.empty() ? ckpt.config.seeds : base.seeds;
  if (!seeds_text.empty()) {
    seeds.clear();
    try {
      for (const auto& s : split_list(seeds_text)) seeds.push_back(parse_number<std::uint64_t>(s));
    } catch (const std::invalid_argument&) {
      throw ConfigError("--seeds must be a comma-separated list of integers");
    }
    if (seeds.empty()) throw ConfigError("--seeds is empty");
  }
  downstream::Aggregation mode;
  try {
    mode = downstream::parse_aggregation(agg);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  const auto ds = downstream::read_task_csv(dataset_path);
  const auto report = downstream::evaluate(ckpt.model, ds, "checkpoint", mode, seeds);
  Emitter(g, out)(report.to_json() + "\n");
  return kExitOk;
}

int cmd_ablate(const Globals& g, std::ostream& out) {
  const RunConfig cfg = config_from(g, true);
  const auto json = run_ablation(cfg);
  if (g.out.empty()) {
    const fs::path report = fs::path(cfg.output_dir) / "ablation.json";
    write_file_atomic(report, json);
    out << "ablation=" << report.string() << "\n";
  } else {
    write_file_atomic(g.out, json);
  }
  return kExitOk;
}

int cmd_export(const Globals& g, const std::string& ckpt_path, const std::string& corpus_path,
               const std::string& modality, bool pca, std::ostream& out, std::ostream& err) {
  if (modality != "both" && modality != "smiles" && modality != "graph") {
    throw ConfigError("--modality must be both, smiles or graph");
  }
  auto ckpt = load_checkpoint(ckpt_path);
  const auto corpus = read_corpus(corpus_path);
  std::vector<std::string> ok;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      chem::parse(corpus[i]);
      ok.push_back(corpus[i]);
    } catch (const chem::SmilesError& ex) {
      err << "row " << (i + 1) << ": skipped '" << corpus[i] << "': " << ex.what() << "\n";
    }
  }
  const auto emb = downstream::embed(ckpt.model, ok, true);
  std::vector<std::pair<std::size_t, std::string>> rows;
  std::vector<const Eigen::MatrixXd*> sources;
  for (std::size_t i = 0; i < ok.size(); ++i) {
    if (modality != "graph") rows.emplace_back(i, "smiles");
    if (modality != "smiles") rows.emplace_back(i, "graph");
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), emb.smiles.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& src = rows[r].second == "smiles" ? emb.smiles : emb.graph;
    data.row(static_cast<Eigen::Index>(r)) = src.row(static_cast<Eigen::Index>(rows[r].first));
  }
  if (pca) data = downstream::pca2(data);
  std::string csv = "smiles,modality";
  for (Eigen::Index c = 0; c < data.cols(); ++c) csv += pca ? ",pc" + std::to_string(c + 1) : ",e" + std::to_string(c);
  csv += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    csv += ok[rows[r].first] + "," + rows[r].second;
    for (Eigen::Index c = 0; c < data.cols(); ++c) csv += "," + fmt(data(static_cast<Eigen::Index>(r), c));
    csv += "\n";
  }
  Emitter(g, out)(csv);
  return kExitOk;
}

std::string bond_name(chem::BondOrder o) {
  switch (o) {
    case chem::BondOrder::Single: return "single";
    case chem::BondOrder::Double: return "double";
    case chem::BondOrder::Triple: return "triple";
    case chem::BondOrder::Aromatic: return "aromatic";
  }
  return "?";
}

int cmd_parse(const Globals& g, const std::string& smiles, std::ostream& out) {
  const auto parsed = chem::parse(smiles);
  const auto& mol = parsed.molecule;
  const auto rings = chem::ring_info(mol);
  std::string text = "atoms=" + std::to_string(mol.num_atoms()) + " bonds=" + std::to_string(mol.num_bonds()) + "\n";
  for (std::size_t a = 0; a < mol.num_atoms(); ++a) {
    const auto& at = mol.atoms[a];
    text += "atom " + std::to_string(a) + " symbol=" + at.symbol + " aromatic=" + (at.aromatic ? "1" : "0") +
            " charge=" + std::to_string(at.formal_charge) + " hydrogens=" + std::to_string(at.total_h()) +
            " in_ring=" + (rings.atom_in_ring[a] ? "1" : "0") + "\n";
  }
  for (std::size_t b = 0; b < mol.num_bonds(); ++b) {
    const auto& bd = mol.bonds[b];
    text += "bond " + std::to_string(b) + " " + std::to_string(bd.begin) + "-" + std::to_string(bd.end) +
            " order=" + bond_name(bd.order) + " in_ring=" + (rings.bond_in_ring[b] ? "1" : "0") + "\n";
  }
  Emitter(g, out)(text);
  return kExitOk;
}

int cmd_fingerprint(const Globals& g, const std::string& smiles, int radius, std::size_t bits, std::ostream& out) {
  if (radius < 0 || bits == 0) throw ConfigError("--radius must be >= 0 and --bits >= 1");
  const auto fp = fp::morgan(chem::parse(smiles).molecule, radius, bits);
  std::string text = "n_bits=" + std::to_string(fp.n_bits) + " on_bits=" + std::to_string(fp.popcount()) + "\nbits=";
  bool first = true;
  for (auto b : fp.set_bits()) {
    text += (first ? "" : ",") + std::to_string(b);
    first = false;
  }
  Emitter(g, out)(text + "\n");
  return kExitOk;
}

int cmd_simmatrix(const Globals& g, const std::string& path, int radius, std::size_t bits, std::ostream& out) {
  if (radius < 0 || bits == 0) throw ConfigError("--radius must be >= 0 and --bits >= 1");
  const auto corpus = read_corpus(path);
  std::vector<chem::Molecule> mols;
  for (const auto& s : corpus) mols.push_back(chem::parse(s).molecule);
  const auto sim = fp::similarity_matrix(mols, radius, bits);
  std::string text;
  for (std::size_t i = 0; i < sim.n; ++i) {
    for (std::size_t j = 0; j < sim.n; ++j) text += (j == 0 ? "" : "\t") + fmt(sim(i, j));
    text += "\n";
  }
  Emitter(g, out)(text);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-granularity SMILES/graph fusion toolkit", "molfusion"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "Run configuration file");
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the configured seed");
  app.add_option("--out", g.out, "Output path");

  auto* pretrain = app.add_subcommand("pretrain", "Train both encoders with the configured objectives");
  auto* probe = app.add_subcommand("probe", "Evaluate a checkpoint with a frozen linear probe");
  std::string ckpt_path, dataset_path, agg = "CCO", seeds_text;
  probe->add_option("checkpoint", ckpt_path)->required();
  probe->add_option("dataset", dataset_path)->required();
  probe->add_option("--agg", agg, "SMILES_ONLY, MG_ONLY, EWA or CCO");
  probe->add_option("--seeds", seeds_text, "Comma-separated probe seeds");
  auto* ablate = app.add_subcommand("ablate", "Run the 7-method x 4-aggregation ablation grid");
  auto* export_cmd = app.add_subcommand("export-embeddings", "Write projected pooled embeddings as CSV");
  std::string corpus_path, modality = "both";
  bool pca = false;
  export_cmd->add_option("checkpoint", ckpt_path)->required();
  export_cmd->add_option("corpus", corpus_path)->required();
  export_cmd->add_option("--modality", modality, "both, smiles or graph");
  export_cmd->add_flag("--pca2", pca, "Project to two principal components");
  auto* parse_cmd = app.add_subcommand("parse", "Print the molecular graph of a SMILES");
  std::string smiles;
  parse_cmd->add_option("smiles", smiles)->required();
  auto* fp_cmd = app.add_subcommand("fingerprint", "Print the Morgan fingerprint bits of a SMILES");
  int radius = fp::kDefaultRadius;
  std::size_t bits = fp::kDefaultBits;
  fp_cmd->add_option("smiles", smiles)->required();
  fp_cmd->add_option("--radius", radius);
  fp_cmd->add_option("--bits", bits);
  auto* sim_cmd = app.add_subcommand("simmatrix", "Print the Tanimoto matrix of a SMILES file");
  std::string sim_path;
  sim_cmd->add_option("file", sim_path)->required();
  sim_cmd->add_option("--radius", radius);
  sim_cmd->add_option("--bits", bits);
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (pretrain->parsed()) return cmd_pretrain(g, out);
    if (probe->parsed()) return cmd_probe(g, ckpt_path, dataset_path, agg, seeds_text, out);
    if (ablate->parsed()) return cmd_ablate(g, out);
    if (export_cmd->parsed()) return cmd_export(g, ckpt_path, corpus_path, modality, pca, out, err);
    if (parse_cmd->parsed()) return cmd_parse(g, smiles, out);
    if (fp_cmd->parsed()) return cmd_fingerprint(g, smiles, radius, bits, out);
    if (sim_cmd->parsed()) return cmd_simmatrix(g, sim_path, radius, bits, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const enc::InvalidConfig& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const downstream::WidthMismatch& e) {
    err << "checkpoint error: WidthMismatch: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const chem::SmilesError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const downstream::DatasetError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const downstream::DegenerateLabels& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const fusion::EmptyCorpus& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitConfig;
}

}  // namespace molfusion::cli
