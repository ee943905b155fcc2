#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "eeggraph/graph.hpp"
#include "eeggraph/model.hpp"
#include "eeggraph/signal.hpp"
#include "eeggraph/split.hpp"

namespace eeggraph {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian");

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment configuration. The canonical digest stamps every artifact so
// mixed-config artifacts are rejected downstream.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  // preprocessing
  double target_rate_hz = kTargetRateHz;
  double highpass_hz = 1.0;
  double notch_hz = 50.0;
  double window_s = kWindowSeconds;
  // spectral
  std::size_t welch_nperseg = 500;
  double welch_overlap = 0.5;
  // graph
  bool spatial_proximity = true;  // 1 - scaled geodesic distance
  std::string electrode_table;    // optional override path
  // training
  double learning_rate = 0.1;
  std::size_t decay_every = 20;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 10;
  std::size_t min_epochs = 40;
  bool log_features = true;  // feed log10 band powers to the models
  double gcn_dropout = 0.1;
  double linear_dropout = 0.5;
  // evaluation protocol
  std::size_t k_folds = 10;
  double test_fraction = 0.30;
  std::uint64_t seed = 0;

  WelchParams welch_params() const {
    return WelchParams{welch_nperseg, welch_overlap};
  }
};

inline json to_json(const ExperimentConfig& c) {
  return json{{"target_rate_hz", c.target_rate_hz},
              {"highpass_hz", c.highpass_hz},
              {"notch_hz", c.notch_hz},
              {"window_s", c.window_s},
              {"welch_nperseg", c.welch_nperseg},
              {"welch_overlap", c.welch_overlap},
              {"spatial_proximity", c.spatial_proximity},
              {"electrode_table", c.electrode_table},
              {"learning_rate", c.learning_rate},
              {"decay_every", c.decay_every},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"early_stop_patience", c.early_stop_patience},
              {"min_epochs", c.min_epochs},
              {"log_features", c.log_features},
              {"gcn_dropout", c.gcn_dropout},
              {"linear_dropout", c.linear_dropout},
              {"k_folds", c.k_folds},
              {"test_fraction", c.test_fraction},
              {"seed", c.seed}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get("target_rate_hz", c.target_rate_hz);
  get("highpass_hz", c.highpass_hz);
  get("notch_hz", c.notch_hz);
  get("window_s", c.window_s);
  get("welch_nperseg", c.welch_nperseg);
  get("welch_overlap", c.welch_overlap);
  get("spatial_proximity", c.spatial_proximity);
  get("electrode_table", c.electrode_table);
  get("learning_rate", c.learning_rate);
  get("decay_every", c.decay_every);
  get("batch_size", c.batch_size);
  get("max_epochs", c.max_epochs);
  get("early_stop_patience", c.early_stop_patience);
  get("min_epochs", c.min_epochs);
  get("log_features", c.log_features);
  get("gcn_dropout", c.gcn_dropout);
  get("linear_dropout", c.linear_dropout);
  get("k_folds", c.k_folds);
  get("test_fraction", c.test_fraction);
  get("seed", c.seed);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config: " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

// nlohmann keeps object keys sorted, so dump() is already canonical.
inline std::string config_digest(const ExperimentConfig& c) {
  return fnv1a_hex(to_json(c).dump());
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string subject_id;
  Label label = Label::Healthy;
  double sample_rate_hz = 0.0;
  std::vector<std::string> channel_names;
  std::vector<std::string> files;  // one signal file per trial
};

struct Manifest {
  int version = 1;
  std::string stage = "raw";  // "raw" or "preprocessed"
  std::string config_digest;  // set once a config has shaped the data
  std::vector<ManifestEntry> recordings;
};

inline void save_manifest(const Manifest& m, const std::string& path) {
  json j;
  j["format"] = "eeggraph.manifest";
  j["version"] = m.version;
  j["stage"] = m.stage;
  if (!m.config_digest.empty()) j["config_digest"] = m.config_digest;
  json recs = json::array();
  for (const auto& e : m.recordings) {
    recs.push_back(json{{"subject_id", e.subject_id},
                        {"label", to_string(e.label)},
                        {"sample_rate_hz", e.sample_rate_hz},
                        {"channel_names", e.channel_names},
                        {"files", e.files}});
  }
  j["recordings"] = recs;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest: " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "eeggraph.manifest")
    throw FormatError("not a manifest file: " + path);
  Manifest m;
  m.version = j.value("version", 1);
  m.stage = j.value("stage", "raw");
  m.config_digest = j.value("config_digest", "");
  std::set<std::string> seen;
  for (const auto& r : j.at("recordings")) {
    ManifestEntry e;
    e.subject_id = r.at("subject_id").get<std::string>();
    e.label = label_from_string(r.at("label").get<std::string>());
    e.sample_rate_hz = r.at("sample_rate_hz").get<double>();
    e.channel_names = r.at("channel_names").get<std::vector<std::string>>();
    e.files = r.at("files").get<std::vector<std::string>>();
    if (!seen.insert(e.subject_id).second)
      throw FormatError("duplicate subject_id in manifest: " + e.subject_id);
    m.recordings.push_back(std::move(e));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Raw-signal container: one JSON header line, then little-endian float32
// samples, channel-major.
// ---------------------------------------------------------------------------

struct SignalFile {
  std::string subject_id;
  Label label = Label::Healthy;
  double sample_rate_hz = 0.0;
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> samples;  // [channel][sample], uV
};

inline void save_signal(const SignalFile& sig, const std::string& path) {
  const std::size_t n_samples =
      sig.samples.empty() ? 0 : sig.samples.front().size();
  for (const auto& ch : sig.samples)
    if (ch.size() != n_samples)
      throw LengthMismatch("signal channels differ in length");
  json header{{"format", "eeggraph.signal"},
              {"version", 1},
              {"subject_id", sig.subject_id},
              {"label", to_string(sig.label)},
              {"sample_rate_hz", sig.sample_rate_hz},
              {"n_channels", sig.samples.size()},
              {"n_samples", n_samples},
              {"channels", sig.channel_names},
              {"unit", "uV"}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write signal file: " + path);
  out << header.dump() << "\n";
  std::vector<float> buf(n_samples);
  for (const auto& ch : sig.samples) {
    for (std::size_t i = 0; i < n_samples; ++i)
      buf[i] = static_cast<float>(ch[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

inline SignalFile load_signal(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open signal file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw FormatError("missing signal header: " + path);
  json header = json::parse(header_line);
  if (header.value("format", "") != "eeggraph.signal")
    throw FormatError("not a signal file: " + path);
  SignalFile sig;
  sig.subject_id = header.at("subject_id").get<std::string>();
  sig.label = label_from_string(header.at("label").get<std::string>());
  sig.sample_rate_hz = header.at("sample_rate_hz").get<double>();
  sig.channel_names = header.at("channels").get<std::vector<std::string>>();
  const auto n_channels = header.at("n_channels").get<std::size_t>();
  const auto n_samples = header.at("n_samples").get<std::size_t>();
  if (n_channels != sig.channel_names.size())
    throw FormatError("channel count mismatch in header: " + path);
  sig.samples.assign(n_channels, std::vector<double>(n_samples));
  std::vector<float> buf(n_samples);
  for (auto& ch : sig.samples) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw FormatError("truncated signal payload: " + path);
    for (std::size_t i = 0; i < n_samples; ++i) ch[i] = buf[i];
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Feature store: flat binary record table + JSON index.
// ---------------------------------------------------------------------------

struct WindowRecord {
  std::uint32_t subject_index = 0;
  std::uint32_t window_index = 0;
  std::uint32_t label = 0;
  std::array<float, kNumChannels * kNumBands> features{};
  std::array<float, kNumChannels * kNumChannels> func_adj{};
};

struct FeatureStore {
  std::string config_digest;
  AdjacencyMatrix spatial;  // single cached spatial adjacency
  std::vector<SubjectEntry> subjects;
  std::vector<WindowRecord> records;
  std::size_t dropped_windows = 0;

  DatasetIndex index() const {
    DatasetIndex idx;
    idx.entries = subjects;
    return idx;
  }
};

inline std::string store_data_path(const std::string& dir) {
  return (std::filesystem::path(dir) / "features.bin").string();
}
inline std::string store_index_path(const std::string& dir) {
  return (std::filesystem::path(dir) / "index.json").string();
}

inline void save_feature_store(const FeatureStore& store,
                               const std::string& dir) {
  std::filesystem::create_directories(dir);
  json idx;
  idx["format"] = "eeggraph.featurestore";
  idx["version"] = 1;
  idx["config_digest"] = store.config_digest;
  idx["dropped_windows"] = store.dropped_windows;
  idx["spatial_adjacency"] = std::vector<double>(store.spatial.values.begin(),
                                                 store.spatial.values.end());
  json subjects = json::array();
  for (const auto& s : store.subjects)
    subjects.push_back(json{{"subject_id", s.subject_id},
                            {"label", to_string(s.label)},
                            {"window_count", s.window_count},
                            {"record_offset", s.record_offset}});
  idx["subjects"] = subjects;
  {
    std::ofstream out(store_index_path(dir));
    if (!out) throw FormatError("cannot write feature index: " + dir);
    out << idx.dump(2) << "\n";
  }
  std::ofstream out(store_data_path(dir), std::ios::binary);
  if (!out) throw FormatError("cannot write feature table: " + dir);
  for (const auto& r : store.records) {
    out.write(reinterpret_cast<const char*>(&r.subject_index), 4);
    out.write(reinterpret_cast<const char*>(&r.window_index), 4);
    out.write(reinterpret_cast<const char*>(&r.label), 4);
    out.write(reinterpret_cast<const char*>(r.features.data()),
              sizeof(r.features));
    out.write(reinterpret_cast<const char*>(r.func_adj.data()),
              sizeof(r.func_adj));
  }
}

inline FeatureStore load_feature_store(const std::string& dir) {
  std::ifstream idx_in(store_index_path(dir));
  if (!idx_in) throw FormatError("cannot open feature index in " + dir);
  json idx;
  idx_in >> idx;
  if (idx.value("format", "") != "eeggraph.featurestore")
    throw FormatError("not a feature store: " + dir);
  FeatureStore store;
  store.config_digest = idx.at("config_digest").get<std::string>();
  store.dropped_windows = idx.value("dropped_windows", std::size_t{0});
  const auto spatial = idx.at("spatial_adjacency").get<std::vector<double>>();
  if (spatial.size() != store.spatial.values.size())
    throw FormatError("bad spatial adjacency size");
  std::copy(spatial.begin(), spatial.end(), store.spatial.values.begin());
  store.spatial.kind = AdjacencyKind::Spatial;
  std::size_t total = 0;
  for (const auto& s : idx.at("subjects")) {
    SubjectEntry e;
    e.subject_id = s.at("subject_id").get<std::string>();
    e.label = label_from_string(s.at("label").get<std::string>());
    e.window_count = s.at("window_count").get<std::size_t>();
    e.record_offset = s.at("record_offset").get<std::size_t>();
    total += e.window_count;
    store.subjects.push_back(std::move(e));
  }
  std::ifstream in(store_data_path(dir), std::ios::binary);
  if (!in) throw FormatError("cannot open feature table in " + dir);
  store.records.resize(total);
  for (auto& r : store.records) {
    in.read(reinterpret_cast<char*>(&r.subject_index), 4);
    in.read(reinterpret_cast<char*>(&r.window_index), 4);
    in.read(reinterpret_cast<char*>(&r.label), 4);
    in.read(reinterpret_cast<char*>(r.features.data()), sizeof(r.features));
    in.read(reinterpret_cast<char*>(r.func_adj.data()), sizeof(r.func_adj));
    if (!in) throw FormatError("truncated feature table in " + dir);
  }
  return store;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON header + named little-endian float64 tensors.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::vector<std::pair<std::string, std::vector<T>*>> all_state_tensors(
    ModelParams<T>& p) {
  std::vector<std::pair<std::string, std::vector<T>*>> out;
  const auto names = trainable_tensor_names(p.spec);
  auto trainable = trainable_tensors(p);
  for (std::size_t i = 0; i < trainable.size(); ++i)
    out.emplace_back(names[i], trainable[i]);
  for (std::size_t l = 0; l < p.gcn_norms.size(); ++l) {
    out.emplace_back("gcn_bn" + std::to_string(l) + ".running_mean",
                     &p.gcn_norms[l].running_mean);
    out.emplace_back("gcn_bn" + std::to_string(l) + ".running_var",
                     &p.gcn_norms[l].running_var);
  }
  for (std::size_t l = 0; l < p.linear_norms.size(); ++l) {
    out.emplace_back("linear_bn" + std::to_string(l) + ".running_mean",
                     &p.linear_norms[l].running_mean);
    out.emplace_back("linear_bn" + std::to_string(l) + ".running_var",
                     &p.linear_norms[l].running_var);
  }
  return out;
}

}  // namespace detail

constexpr char kCheckpointMagic[8] = {'E', 'G', 'C', 'N',
                                      'C', 'K', 'P', 'T'};

template <typename T>
void save_checkpoint(const ModelParams<T>& params, std::uint64_t seed,
                     const std::string& config_digest,
                     const std::string& path) {
  auto& mutable_params = const_cast<ModelParams<T>&>(params);
  auto tensors = detail::all_state_tensors(mutable_params);
  json header;
  header["format"] = "eeggraph.checkpoint";
  header["version"] = 1;
  header["architecture"] = to_string(params.spec.arch);
  header["input_dim"] = params.spec.input_dim;
  header["gcn_dims"] = params.spec.gcn_dims;
  header["hidden_dims"] = params.spec.hidden_dims;
  header["gcn_dropout"] = params.spec.gcn_dropout;
  header["linear_dropout"] = params.spec.linear_dropout;
  header["seed"] = seed;
  header["config_digest"] = config_digest;
  json tlist = json::array();
  for (const auto& [name, vec] : tensors)
    tlist.push_back(json{{"name", name}, {"count", vec->size()}});
  header["tensors"] = tlist;

  const std::string hdr = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const auto hlen = static_cast<std::uint32_t>(hdr.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (const auto& [name, vec] : tensors) {
    std::vector<double> d64(vec->begin(), vec->end());
    out.write(reinterpret_cast<const char*>(d64.data()),
              static_cast<std::streamsize>(d64.size() * sizeof(double)));
  }
}

struct CheckpointInfo {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::string config_digest;
};

template <typename T>
std::pair<ModelParams<T>, CheckpointInfo> load_checkpoint(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCheckpoint("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError("bad checkpoint magic: " + path);
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 4);
  std::string hdr(hlen, '\0');
  in.read(hdr.data(), hlen);
  if (!in) throw FormatError("truncated checkpoint header: " + path);
  json header = json::parse(hdr);
  if (header.value("format", "") != "eeggraph.checkpoint")
    throw FormatError("not a checkpoint: " + path);

  CheckpointInfo info;
  info.spec.arch =
      architecture_from_string(header.at("architecture").get<std::string>());
  info.spec.input_dim = header.at("input_dim").get<std::size_t>();
  info.spec.gcn_dims = header.at("gcn_dims").get<std::vector<std::size_t>>();
  info.spec.hidden_dims =
      header.at("hidden_dims").get<std::vector<std::size_t>>();
  info.spec.gcn_dropout = header.at("gcn_dropout").get<double>();
  info.spec.linear_dropout = header.at("linear_dropout").get<double>();
  info.seed = header.at("seed").get<std::uint64_t>();
  info.config_digest = header.at("config_digest").get<std::string>();

  ModelParams<T> params = init_params<T>(info.spec, 0);
  auto tensors = detail::all_state_tensors(params);
  const auto& tlist = header.at("tensors");
  if (tlist.size() != tensors.size())
    throw FormatError("checkpoint tensor list mismatch: " + path);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto name = tlist[i].at("name").get<std::string>();
    const auto count = tlist[i].at("count").get<std::size_t>();
    if (name != tensors[i].first || count != tensors[i].second->size())
      throw FormatError("checkpoint tensor mismatch at " + name);
    std::vector<double> d64(count);
    in.read(reinterpret_cast<char*>(d64.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw FormatError("truncated checkpoint payload: " + path);
    for (std::size_t k = 0; k < count; ++k)
      (*tensors[i].second)[k] = static_cast<T>(d64[k]);
  }
  return {std::move(params), std::move(info)};
}

}  // namespace eeggraph
