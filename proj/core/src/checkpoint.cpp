#include "gite/model/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "gite/config/key_value.hpp"
#include "gite/error.hpp"

namespace gite::model {

void write_checkpoint(std::ostream& out, GiteModel& model) {
  out << kCheckpointMagic << '\n';
  config::KeyValue kv;
  model.config().write(kv);
  for (const auto& [k, v] : kv.entries()) out << "config " << k << ' ' << v << '\n';
  const data::ZScore& z = model.outcome_scale();
  out << "zscore " << (z.enabled ? 1 : 0) << ' ' << config::format_hex(z.mean) << ' '
      << config::format_hex(z.scale) << '\n';
  out << "amplifier " << config::format_hex(model.amplifier().denominator()) << '\n';
  std::vector<ag::Parameter*> params = model.parameters();
  if (model.amplifier().learnable() && !model.amplifier().enabled()) {
    params.push_back(&model.amplifier().pi_eta());
  }
  for (ag::Parameter* p : params) {
    out << "tensor " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (std::size_t r = 0; r < p->value.rows(); ++r) {
      for (std::size_t c = 0; c < p->value.cols(); ++c) {
        if (c) out << ' ';
        out << config::format_hex(p->value(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, GiteModel& model) {
  std::ofstream out(path);
  if (!out) throw IngestError(path.string() + ": cannot write checkpoint");
  write_checkpoint(out, model);
  if (!out) throw IngestError(path.string() + ": write failed");
}

GiteModel read_checkpoint(std::istream& in, const data::Dataset& dataset, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& what) -> IngestError {
    return IngestError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!next() || line != kCheckpointMagic) throw fail("not a checkpoint (bad magic line)");

  config::KeyValue kv;
  data::ZScore zscore;
  double denominator = 0.0;
  struct Stored {
    std::size_t rows, cols;
    std::vector<double> values;
  };
  std::map<std::string, Stored> tensors;
  bool ended = false;
  while (next()) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "config") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      kv.set(key, value);
    } else if (kind == "zscore") {
      int enabled = 0;
      std::string mean, scale;
      ls >> enabled >> mean >> scale;
      zscore.enabled = enabled != 0;
      zscore.mean = config::parse_hex(mean, "zscore mean");
      zscore.scale = config::parse_hex(scale, "zscore scale");
    } else if (kind == "amplifier") {
      std::string d;
      ls >> d;
      denominator = config::parse_hex(d, "amplifier denominator");
    } else if (kind == "tensor") {
      std::string name;
      Stored s{};
      if (!(ls >> name >> s.rows >> s.cols)) throw fail("malformed tensor header");
      for (std::size_t r = 0; r < s.rows; ++r) {
        if (!next()) throw fail("truncated tensor " + name);
        std::istringstream vs(line);
        std::string tok;
        for (std::size_t c = 0; c < s.cols; ++c) {
          if (!(vs >> tok)) throw fail("short row in tensor " + name);
          s.values.push_back(config::parse_hex(tok, name));
        }
      }
      tensors[name] = std::move(s);
    } else if (kind == "end") {
      ended = true;
      break;
    } else {
      throw fail("unknown record '" + kind + "'");
    }
  }
  if (!ended) throw fail("missing end record");

  GiteModel model(ModelConfig::read(kv), dataset);
  if (model.amplifier().denominator() != denominator) {
    throw IngestError(source + ": amplifier built from a different training split");
  }
  model.set_outcome_scale(zscore);
  std::vector<ag::Parameter*> params = model.parameters();
  if (model.amplifier().learnable() && !model.amplifier().enabled()) {
    params.push_back(&model.amplifier().pi_eta());
  }
  for (ag::Parameter* p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw IngestError(source + ": missing tensor " + p->name);
    if (it->second.rows != p->value.rows() || it->second.cols != p->value.cols()) {
      throw IngestError(source + ": tensor " + p->name + " has shape [" +
                        std::to_string(it->second.rows) + ", " + std::to_string(it->second.cols) +
                        "], expected " + ag::shape_string(p->value));
    }
    p->value = ag::Tensor(it->second.rows, it->second.cols, std::move(it->second.values));
  }
  return model;
}

GiteModel load_checkpoint(const std::filesystem::path& path, const data::Dataset& dataset) {
  std::ifstream in(path);
  if (!in) throw IngestError(path.string() + ": cannot open checkpoint");
  return read_checkpoint(in, dataset, path.string());
}

}  // namespace gite::model
