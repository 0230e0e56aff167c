#include "gite/data/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "gite/config/key_value.hpp"
#include "gite/error.hpp"

namespace gite::data {
namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
};

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
    while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
    out.emplace_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path.string() + ": cannot open");
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (t.header.empty()) {
      t.header = split_fields(line);
      continue;
    }
    auto fields = split_fields(line);
    if (fields.size() != t.header.size()) {
      throw IngestError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line_no);
  }
  if (t.header.empty()) throw IngestError(path.string() + ": missing header");
  return t;
}

std::string at(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::size_t parse_id(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IngestError(where + ": bad id '" + s + "'");
  }
  return v;
}

double parse_value(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IngestError(where + ": bad number '" + s + "'");
  }
  if (!std::isfinite(v)) throw IngestError(where + ": non-finite value '" + s + "'");
  return v;
}

/// Row index per id; ids must be exactly 0..n-1 in some order.
std::vector<std::size_t> id_order(const CsvTable& t, const std::filesystem::path& path,
                                  std::size_t n) {
  if (t.rows.size() != n) {
    throw IngestError(path.string() + ": " + std::to_string(t.rows.size()) + " rows, expected " +
                      std::to_string(n));
  }
  std::vector<std::size_t> row_of(n, n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t id = parse_id(t.rows[r][0], at(path, t.lines[r]));
    if (id >= n) throw IngestError(at(path, t.lines[r]) + ": id " + std::to_string(id) + " out of range");
    if (row_of[id] != n) throw IngestError(at(path, t.lines[r]) + ": duplicate id " + std::to_string(id));
    row_of[id] = r;
  }
  return row_of;
}

ag::Tensor read_column(const std::filesystem::path& path, const char* name, std::size_t n) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2 || t.header[1] != name) {
    throw IngestError(path.string() + ": header must be 'id," + name + "'");
  }
  const auto row_of = id_order(t, path, n);
  ag::Tensor out(n, 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = parse_value(t.rows[row_of[i]][1], at(path, t.lines[row_of[i]]));
  return out;
}

std::string fmt(double v) { return config::format_double(v); }

}  // namespace

DatasetFiles DatasetFiles::in_directory(const std::filesystem::path& dir) {
  DatasetFiles f;
  f.edges = dir / "edges.tsv";
  f.covariates = dir / "covariates.csv";
  f.outcomes = dir / "outcomes.csv";
  if (std::filesystem::exists(dir / "tau.csv")) f.tau = dir / "tau.csv";
  if (std::filesystem::exists(dir / "split.csv")) f.split = dir / "split.csv";
  return f;
}

Dataset ingest(const DatasetFiles& files, std::uint64_t split_seed) {
  Dataset d;
  const CsvTable cov = read_csv(files.covariates);
  if (cov.header.size() < 2 || cov.header[0] != "id") {
    throw IngestError(files.covariates.string() + ": header must be 'id,f0,...'");
  }
  const std::size_t n = cov.rows.size();
  const std::size_t c = cov.header.size() - 1;
  const auto cov_row = id_order(cov, files.covariates, n);
  d.covariates = ag::Tensor(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      d.covariates(i, j) = parse_value(cov.rows[cov_row[i]][j + 1], at(files.covariates, cov.lines[cov_row[i]]));

  d.graph = graph::read_edge_file(files.edges, n);

  const CsvTable out = read_csv(files.outcomes);
  if (out.header != std::vector<std::string>{"id", "t", "y"}) {
    throw IngestError(files.outcomes.string() + ": header must be 'id,t,y'");
  }
  const auto out_row = id_order(out, files.outcomes, n);
  d.treatments = ag::Tensor(n, 1);
  d.outcomes = ag::Tensor(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = out.rows[out_row[i]];
    const std::string where = at(files.outcomes, out.lines[out_row[i]]);
    const double t = parse_value(row[1], where);
    if (t != 0.0 && t != 1.0) throw IngestError(where + ": treatment must be 0 or 1, got '" + row[1] + "'");
    d.treatments[i] = t;
    d.outcomes[i] = parse_value(row[2], where);
  }

  if (files.tau) d.tau = read_column(*files.tau, "tau", n);

  if (files.split) {
    const CsvTable s = read_csv(*files.split);
    if (s.header != std::vector<std::string>{"id", "part"}) {
      throw IngestError(files.split->string() + ": header must be 'id,part'");
    }
    const auto row_of = id_order(s, *files.split, n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& part = s.rows[row_of[i]][1];
      if (part == "train") d.split.train.push_back(i);
      else if (part == "val") d.split.val.push_back(i);
      else if (part == "test") d.split.test.push_back(i);
      else throw IngestError(at(*files.split, s.lines[row_of[i]]) + ": unknown part '" + part + "'");
    }
  } else if (n >= 10) {
    d.split = make_split(n, split_seed);
  }
  d.validate();
  return d;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& d) {
  std::filesystem::create_directories(dir);
  const std::size_t n = d.num_nodes();
  graph::write_edge_file(dir / "edges.tsv", d.graph);

  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw IngestError((dir / name).string() + ": cannot write");
    return f;
  };
  {
    auto f = open("covariates.csv");
    f << "id";
    for (std::size_t j = 0; j < d.num_covariates(); ++j) f << ",f" << j;
    f << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      f << i;
      for (std::size_t j = 0; j < d.num_covariates(); ++j) f << ',' << fmt(d.covariates(i, j));
      f << '\n';
    }
  }
  {
    auto f = open("outcomes.csv");
    f << "id,t,y\n";
    for (std::size_t i = 0; i < n; ++i) f << i << ',' << fmt(d.treatments[i]) << ',' << fmt(d.outcomes[i]) << '\n';
  }
  if (d.tau) {
    auto f = open("tau.csv");
    f << "id,tau\n";
    for (std::size_t i = 0; i < n; ++i) f << i << ',' << fmt((*d.tau)[i]) << '\n';
  }
  if (!d.split.train.empty()) {
    std::vector<const char*> part(n, "test");
    for (std::size_t i : d.split.train) part[i] = "train";
    for (std::size_t i : d.split.val) part[i] = "val";
    auto f = open("split.csv");
    f << "id,part\n";
    for (std::size_t i = 0; i < n; ++i) f << i << ',' << part[i] << '\n';
  }
}

}  // namespace gite::data
