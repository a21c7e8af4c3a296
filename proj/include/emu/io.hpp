#pragma once
#include <string>
#include <vector>

#include "emu/ergm.hpp"
#include "emu/isampling.hpp"
#include "emu/pointproc.hpp"

namespace emu::io {

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

// Rectangular CSV with a header row; values written via format_double so a
// write/read cycle is lossless and byte-stable.
void write_csv(const std::string& path, const Matrix& m,
               const std::vector<std::string>& columns);
Matrix read_csv(const std::string& path,
                std::vector<std::string>* columns = nullptr);

// Undirected graphs: "i j" edge pairs (0-indexed) with a "# nodes n" header,
// or a dense 0/1 adjacency CSV (validated symmetric, zero diagonal).
void write_edge_list(const std::string& path, const ergm::UndirectedGraph& g);
ergm::UndirectedGraph read_edge_list(const std::string& path,
                                     int n_override = -1);
void write_adjacency_csv(const std::string& path,
                         const ergm::UndirectedGraph& g);
ergm::UndirectedGraph read_adjacency_csv(const std::string& path);

// Point patterns: two-column CSV with "x,y" header; the window travels in
// the run configuration / manifest, not the data file.
void write_pattern_csv(const std::string& path, const pp::PointPattern& pat);
pp::PointPattern read_pattern_csv(const std::string& path,
                                  const pp::Window& win);

// Particle table: CSV of particles + response, JSON sidecar with the
// estimation settings needed to reproduce it.
void write_particle_table(const std::string& csv_path,
                          const std::string& json_path,
                          const is::ParticleTable& t);
is::ParticleTable read_particle_table(const std::string& csv_path,
                                      const std::string& json_path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace emu::io
