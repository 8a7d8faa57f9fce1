#include "overlay/moe/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "overlay/datamodel/types.hpp"
#include "overlay/numerics/rng.hpp"

namespace overlay::moe {

namespace {

using nlohmann::ordered_json;

void require(bool ok, const char* field) {
  if (!ok) {
    throw std::invalid_argument(std::string("model config: invalid ") + field);
  }
}

num::Mat init_mat(std::uint64_t seed, std::string_view stream,
                  std::size_t rows, std::size_t cols, double scale) {
  num::Rng rng(num::derive_seed(seed, stream));
  return rng.gaussian_mat(rows, cols, scale);
}

// Expert weights carry the dimension name so checkpoints stay readable.
const char* expert_name(std::size_t e) {
  return data::to_string(static_cast<data::Dimension>(e));
}

MoEParams shaped_params(const ModelConfig& c) {
  MoEParams p;
  p.q_vis = num::Mat(c.d, 1);
  p.q_ocr = num::Mat(c.d, 1);
  for (Conditioner* cond : {&p.cond_vis, &p.cond_ocr}) {
    cond->w_q = num::Mat(c.d, c.d);
    cond->w_k = num::Mat(c.d, c.d);
    cond->w_v = num::Mat(c.d, c.d);
  }
  p.backbone.resize(c.backbone_depth);
  for (auto& layer : p.backbone) {
    layer.w = num::Mat(c.d, c.d);
    layer.b = num::Mat(c.d, 1);
  }
  for (Affine* head : {&p.gate, &p.cls, &p.answer}) {
    head->w = num::Mat(4, c.d);
    head->b = num::Mat(4, 1);
  }
  for (auto& e : p.experts) {
    e.w_gate = num::Mat(c.expert_hidden, c.d);
    e.w_up = num::Mat(c.expert_hidden, c.d);
    e.w_down = num::Mat(c.d, c.expert_hidden);
  }
  p.pool_query = num::Mat(c.d, 1);
  return p;
}

ordered_json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["d"] = c.d;
  j["n_patches"] = c.n_patches;
  j["k_select"] = c.k_select;
  j["backbone_depth"] = c.backbone_depth;
  j["insert_layer"] = c.insert_layer;
  j["expert_hidden"] = c.expert_hidden;
  j["n_query_tokens"] = c.n_query_tokens;
  j["seed"] = c.seed;
  return j;
}

std::size_t config_field(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw std::runtime_error(
        std::string("checkpoint: config field missing or not a nonnegative "
                    "integer: ") +
        key);
  }
  return j.at(key).get<std::size_t>();
}

}  // namespace

void ModelConfig::validate() const {
  require(d >= 1, "d");
  require(n_patches >= 1, "n_patches");
  require(k_select >= 1 && k_select <= n_patches, "k_select");
  require(backbone_depth >= 2, "backbone_depth");
  require(insert_layer >= 1 && insert_layer < backbone_depth, "insert_layer");
  require(expert_hidden >= 1, "expert_hidden");
  require(n_query_tokens >= 1, "n_query_tokens");
}

MoEParams init_params(const ModelConfig& config) {
  config.validate();
  const std::uint64_t seed = config.seed;
  const double sd = 1.0 / std::sqrt(static_cast<double>(config.d));
  const double sh = 1.0 / std::sqrt(static_cast<double>(config.expert_hidden));

  MoEParams p = shaped_params(config);
  p.q_vis = init_mat(seed, "init.q_vis", config.d, 1, sd);
  p.q_ocr = init_mat(seed, "init.q_ocr", config.d, 1, sd);
  // One stream, used twice: identical conditioners keep congruent streams
  // bit-identical through conditioning, which the consistency signal relies
  // on at the no-conflict baseline.
  p.cond_vis.w_q = init_mat(seed, "init.cond.w_q", config.d, config.d, sd);
  p.cond_vis.w_k = init_mat(seed, "init.cond.w_k", config.d, config.d, sd);
  p.cond_vis.w_v = init_mat(seed, "init.cond.w_v", config.d, config.d, sd);
  p.cond_ocr = p.cond_vis;
  for (std::size_t l = 0; l < config.backbone_depth; ++l) {
    const std::string tag = "init.backbone." + std::to_string(l);
    p.backbone[l].w = init_mat(seed, tag + ".w", config.d, config.d, sd);
    p.backbone[l].b = init_mat(seed, tag + ".b", config.d, 1, sd);
  }
  p.gate.w = init_mat(seed, "init.gate.w", 4, config.d, sd);
  p.cls.w = init_mat(seed, "init.cls.w", 4, config.d, sd);
  p.answer.w = init_mat(seed, "init.answer.w", 4, config.d, sd);
  for (std::size_t e = 0; e < 4; ++e) {
    const std::string tag = std::string("init.expert.") + expert_name(e);
    p.experts[e].w_gate =
        init_mat(seed, tag + ".w_gate", config.expert_hidden, config.d, sd);
    p.experts[e].w_up =
        init_mat(seed, tag + ".w_up", config.expert_hidden, config.d, sd);
    p.experts[e].w_down =
        init_mat(seed, tag + ".w_down", config.d, config.expert_hidden, sh);
  }
  p.pool_query = init_mat(seed, "init.pool_query", config.d, 1, sd);
  return p;
}

void visit_params(MoEParams& p, void* ctx, ParamVisitor visit) {
  visit(ctx, "q_vis", p.q_vis, false);
  visit(ctx, "q_ocr", p.q_ocr, false);
  visit(ctx, "cond_vis.w_q", p.cond_vis.w_q, false);
  visit(ctx, "cond_vis.w_k", p.cond_vis.w_k, false);
  visit(ctx, "cond_vis.w_v", p.cond_vis.w_v, false);
  visit(ctx, "cond_ocr.w_q", p.cond_ocr.w_q, false);
  visit(ctx, "cond_ocr.w_k", p.cond_ocr.w_k, false);
  visit(ctx, "cond_ocr.w_v", p.cond_ocr.w_v, false);
  for (std::size_t l = 0; l < p.backbone.size(); ++l) {
    const std::string tag = "backbone." + std::to_string(l);
    visit(ctx, tag + ".w", p.backbone[l].w, true);
    visit(ctx, tag + ".b", p.backbone[l].b, true);
  }
  visit(ctx, "gate.w", p.gate.w, false);
  visit(ctx, "gate.b", p.gate.b, false);
  visit(ctx, "cls.w", p.cls.w, false);
  visit(ctx, "cls.b", p.cls.b, false);
  for (std::size_t e = 0; e < 4; ++e) {
    const std::string tag = std::string("experts.") + expert_name(e);
    visit(ctx, tag + ".w_gate", p.experts[e].w_gate, false);
    visit(ctx, tag + ".w_up", p.experts[e].w_up, false);
    visit(ctx, tag + ".w_down", p.experts[e].w_down, false);
  }
  visit(ctx, "answer.w", p.answer.w, false);
  visit(ctx, "answer.b", p.answer.b, false);
  visit(ctx, "pool_query", p.pool_query, false);
}

std::string checkpoint_to_json(const ModelConfig& config,
                               const MoEParams& params) {
  ordered_json root;
  root["schema_version"] = "1";
  root["kind"] = "moe-checkpoint";
  root["config"] = config_to_json(config);
  ordered_json tensors = ordered_json::object();
  for_each_param(params, [&tensors](const std::string& name,
                                    const num::Mat& m, bool) {
    ordered_json t;
    t["rows"] = m.rows;
    t["cols"] = m.cols;
    t["data"] = m.data;
    tensors[name] = std::move(t);
  });
  root["params"] = std::move(tensors);
  return root.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: not valid JSON: ") +
                             e.what());
  }
  if (!root.is_object() || root.value("schema_version", "") != "1") {
    throw std::runtime_error("checkpoint: missing or unsupported "
                             "schema_version");
  }
  if (root.value("kind", "") != "moe-checkpoint") {
    throw std::runtime_error("checkpoint: kind is not moe-checkpoint");
  }
  if (!root.contains("config") || !root.at("config").is_object()) {
    throw std::runtime_error("checkpoint: missing config object");
  }
  const ordered_json& cj = root.at("config");

  Checkpoint ck;
  ck.config.d = config_field(cj, "d");
  ck.config.n_patches = config_field(cj, "n_patches");
  ck.config.k_select = config_field(cj, "k_select");
  ck.config.backbone_depth = config_field(cj, "backbone_depth");
  ck.config.insert_layer = config_field(cj, "insert_layer");
  ck.config.expert_hidden = config_field(cj, "expert_hidden");
  ck.config.n_query_tokens = config_field(cj, "n_query_tokens");
  if (!cj.contains("seed") || !cj.at("seed").is_number_unsigned()) {
    throw std::runtime_error("checkpoint: config field missing or not a "
                             "nonnegative integer: seed");
  }
  ck.config.seed = cj.at("seed").get<std::uint64_t>();
  try {
    ck.config.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }

  if (!root.contains("params") || !root.at("params").is_object()) {
    throw std::runtime_error("checkpoint: missing params object");
  }
  const ordered_json& tensors = root.at("params");

  ck.params = shaped_params(ck.config);
  std::size_t expected = 0;
  for_each_param(ck.params, [&](const std::string& name, num::Mat& m, bool) {
    ++expected;
    if (!tensors.contains(name)) {
      throw std::runtime_error("checkpoint: missing tensor: " + name);
    }
    const ordered_json& t = tensors.at(name);
    if (t.value("rows", std::size_t{0}) != m.rows ||
        t.value("cols", std::size_t{0}) != m.cols) {
      throw std::runtime_error("checkpoint: tensor shape mismatch: " + name);
    }
    if (!t.contains("data") || !t.at("data").is_array() ||
        t.at("data").size() != m.size()) {
      throw std::runtime_error("checkpoint: tensor data size mismatch: " +
                               name);
    }
    num::Vec data;
    try {
      data = t.at("data").get<num::Vec>();
    } catch (const nlohmann::json::exception&) {
      throw std::runtime_error("checkpoint: non-numeric entries in: " + name);
    }
    if (!num::all_finite(data)) {
      throw std::runtime_error("checkpoint: non-finite entries in: " + name);
    }
    m.data = std::move(data);
  });
  if (tensors.size() != expected) {
    throw std::runtime_error("checkpoint: unexpected extra tensors");
  }
  return ck;
}

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const MoEParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  }
  out << checkpoint_to_json(config, params);
  if (!out) {
    throw std::runtime_error("checkpoint: write failed: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace overlay::moe
