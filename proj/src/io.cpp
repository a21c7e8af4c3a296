#include "emu/io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace emu::io {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read file: " + path);
  return in;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const Matrix& m,
               const std::vector<std::string>& columns) {
  if (static_cast<int>(columns.size()) != m.cols())
    throw ValidationError("write_csv: header size mismatch");
  auto out = open_out(path);
  for (std::size_t j = 0; j < columns.size(); ++j)
    out << (j ? "," : "") << columns[j];
  out << "\n";
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j)
      out << (j ? "," : "") << format_double(m(i, j));
    out << "\n";
  }
}

Matrix read_csv(const std::string& path, std::vector<std::string>* columns) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("read_csv: empty file " + path);
  const auto header = split_commas(line);
  if (columns) *columns = header;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size())
      throw ValidationError("read_csv: ragged row in " + path);
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      try {
        row[j] = std::stod(fields[j]);
      } catch (const std::exception&) {
        throw ValidationError("read_csv: non-numeric value in " + path);
      }
    }
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), header.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_edge_list(const std::string& path, const ergm::UndirectedGraph& g) {
  auto out = open_out(path);
  out << "# nodes " << g.nodes() << "\n";
  for (int i = 0; i < g.nodes(); ++i)
    for (int j = i + 1; j < g.nodes(); ++j)
      if (g.has_edge(i, j)) out << i << " " << j << "\n";
}

ergm::UndirectedGraph read_edge_list(const std::string& path, int n_override) {
  auto in = open_in(path);
  std::string line;
  int n = n_override;
  std::vector<std::pair<int, int>> edges;
  int max_node = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line.substr(1));
      std::string word;
      int value;
      if (ss >> word >> value && word == "nodes" && n_override < 0) n = value;
      continue;
    }
    std::stringstream ss(line);
    int i, j;
    if (!(ss >> i >> j))
      throw ValidationError("edge list: expected 'i j' pairs in " + path);
    if (i < 0 || j < 0 || i == j)
      throw ValidationError("edge list: invalid dyad in " + path);
    max_node = std::max({max_node, i, j});
    edges.emplace_back(i, j);
  }
  if (n < 0) n = max_node + 1;
  if (n <= max_node)
    throw ValidationError("edge list: node index beyond declared size");
  ergm::UndirectedGraph g(n);
  for (const auto& [i, j] : edges) g.set_edge(i, j, true);
  return g;
}

void write_adjacency_csv(const std::string& path,
                         const ergm::UndirectedGraph& g) {
  auto out = open_out(path);
  for (int i = 0; i < g.nodes(); ++i) {
    for (int j = 0; j < g.nodes(); ++j)
      out << (j ? "," : "") << (i != j && g.has_edge(i, j) ? 1 : 0);
    out << "\n";
  }
}

ergm::UndirectedGraph read_adjacency_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    std::vector<int> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (fields[j] != "0" && fields[j] != "1")
        throw ValidationError("adjacency: entries must be 0/1 in " + path);
      row[j] = fields[j] == "1" ? 1 : 0;
    }
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != n)
      throw ValidationError("adjacency: matrix not square in " + path);
  for (int i = 0; i < n; ++i) {
    if (rows[i][i] != 0)
      throw ValidationError("adjacency: nonzero diagonal in " + path);
    for (int j = 0; j < n; ++j)
      if (rows[i][j] != rows[j][i])
        throw ValidationError("adjacency: matrix not symmetric in " + path);
  }
  ergm::UndirectedGraph g(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rows[i][j]) g.set_edge(i, j, true);
  return g;
}

void write_pattern_csv(const std::string& path, const pp::PointPattern& pat) {
  auto out = open_out(path);
  out << "x,y\n";
  for (const auto& pt : pat.pts)
    out << format_double(pt.x) << "," << format_double(pt.y) << "\n";
}

pp::PointPattern read_pattern_csv(const std::string& path,
                                  const pp::Window& win) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split_commas(line) !=
                                     std::vector<std::string>{"x", "y"})
    throw ValidationError("pattern: expected 'x,y' header in " + path);
  pp::PointPattern pat;
  pat.win = win;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != 2)
      throw ValidationError("pattern: expected two columns in " + path);
    pp::Point pt{std::stod(fields[0]), std::stod(fields[1])};
    if (!win.contains(pt))
      throw ValidationError("pattern: point outside the window in " + path);
    pat.pts.push_back(pt);
  }
  for (std::size_t i = 0; i < pat.pts.size(); ++i)
    for (std::size_t j = i + 1; j < pat.pts.size(); ++j)
      if (pat.pts[i].x == pat.pts[j].x && pat.pts[i].y == pat.pts[j].y)
        throw ValidationError("pattern: duplicate points in " + path);
  return pat;
}

void write_particle_table(const std::string& csv_path,
                          const std::string& json_path,
                          const is::ParticleTable& t) {
  const int p = static_cast<int>(t.particles.cols());
  Matrix m(t.particles.rows(), p + 1);
  m.leftCols(p) = t.particles;
  m.col(p) = t.values;
  std::vector<std::string> cols;
  for (int j = 1; j <= p; ++j) cols.push_back("theta_" + std::to_string(j));
  cols.push_back("log_est");
  write_csv(csv_path, m, cols);

  nlohmann::json j;
  j["mode"] = t.mode;
  j["ensemble_size"] = t.ensemble_size;
  j["chain_cycles"] = t.chain_cycles;
  j["seed"] = t.seed;
  j["theta_tilde"] = std::vector<double>(
      t.theta_tilde.data(), t.theta_tilde.data() + t.theta_tilde.size());
  write_text_file(json_path, j.dump(2) + "\n");
}

is::ParticleTable read_particle_table(const std::string& csv_path,
                                      const std::string& json_path) {
  std::vector<std::string> cols;
  const Matrix m = read_csv(csv_path, &cols);
  if (cols.empty() || cols.back() != "log_est")
    throw ValidationError("particle table: last column must be log_est");
  const int p = static_cast<int>(cols.size()) - 1;
  if (m.rows() < p + 2)
    throw ValidationError("particle table: too few particles");

  nlohmann::json j = nlohmann::json::parse(read_text_file(json_path));
  is::ParticleTable t;
  t.particles = m.leftCols(p);
  t.values = m.col(p);
  t.mode = j.at("mode").get<std::string>();
  t.ensemble_size = j.at("ensemble_size").get<int>();
  t.chain_cycles = j.at("chain_cycles").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  const auto& tt = j.at("theta_tilde");
  t.theta_tilde.resize(tt.size());
  for (std::size_t i = 0; i < tt.size(); ++i)
    t.theta_tilde[i] = tt[i].get<double>();
  if (t.theta_tilde.size() != p)
    throw ValidationError("particle table: sidecar dimension mismatch");
  if (!t.values.allFinite())
    throw ValidationError("particle table: non-finite responses");
  return t;
}

std::string read_text_file(const std::string& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace emu::io
