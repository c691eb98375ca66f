#include "nplme/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "nplme/error.hpp"

namespace nplme {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  out.push_back(cell);
  for (auto& c : out) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return out;
}

double parse_value(const std::string& cell, std::size_t row, const std::string& column,
                   const std::string& origin) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw InvalidInput(origin + ": row " + std::to_string(row) + ", column '" + column +
                       "': not a finite number: '" + cell + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Dataset read_dataset_csv(std::istream& in, const std::string& origin) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_row(line);
    break;
  }
  if (header.empty()) throw InvalidInput(origin + ": missing header row");

  int cw = -1, cy = -1, cx = -1, cg = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    const int ci = static_cast<int>(c);
    if (h == "w") cw = ci;
    else if (h == "y") cy = ci;
    else if (h == "x") cx = ci;
    else if (h == "group") cg = ci;
  }
  if (cw < 0 || cy < 0) throw InvalidInput(origin + ": header must contain columns 'w' and 'y'");

  Dataset d;
  d.meta.source = origin;
  std::vector<double> xs;
  std::vector<int> gs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    ++row;
    const auto cells = split_row(line);
    if (cells.size() != header.size())
      throw InvalidInput(origin + ": row " + std::to_string(row) + " has " +
                         std::to_string(cells.size()) + " fields, expected " +
                         std::to_string(header.size()));
    d.w.push_back(parse_value(cells[cw], row, "w", origin));
    d.y.push_back(parse_value(cells[cy], row, "y", origin));
    if (cx >= 0) xs.push_back(parse_value(cells[cx], row, "x", origin));
    if (cg >= 0) gs.push_back(static_cast<int>(parse_value(cells[cg], row, "group", origin)));
  }
  if (cx >= 0) d.x_latent = std::move(xs);
  if (cg >= 0) d.group_ids = std::move(gs);
  d.validate();
  return d;
}

Dataset read_dataset_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset '" + path + "'");
  return read_dataset_csv(in, path);
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  d.validate();
  out << "# seed=" << d.meta.seed << ",config_hash=" << d.meta.config_hash << "\n";
  out << "w,y";
  if (d.x_latent) out << ",x";
  if (d.group_ids) out << ",group";
  out << "\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << format_double(d.w[i]) << ',' << format_double(d.y[i]);
    if (d.x_latent) out << ',' << format_double((*d.x_latent)[i]);
    if (d.group_ids) out << ',' << (*d.group_ids)[i];
    out << "\n";
  }
}

void write_dataset_csv_file(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write dataset '" + path + "'");
  write_dataset_csv(out, d);
}

}  // namespace nplme
