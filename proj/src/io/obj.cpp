#include "dfield/io/obj.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dfield/errors.hpp"

namespace dfield {

void write_obj(const std::string& path, const TriangleMesh& mesh) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  for (const auto& v : mesh.vertices) std::fprintf(f, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
  for (const auto& t : mesh.faces) std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
  const bool ok = std::ferror(f) == 0;
  if (std::fclose(f) != 0 || !ok) throw ValidationError("failed writing " + path);
}

TriangleMesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  TriangleMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z())) throw ValidationError(path + ":" + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        int i = 0;
        try {
          i = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw ValidationError(path + ":" + std::to_string(lineno) + ": bad face index");
        }
        idx.push_back(i < 0 ? static_cast<int>(mesh.vertices.size()) + i : i - 1);
      }
      if (idx.size() < 3) throw ValidationError(path + ":" + std::to_string(lineno) + ": face needs 3 vertices");
      for (int i : idx)
        if (i < 0 || i >= static_cast<int>(mesh.vertices.size()))
          throw ValidationError(path + ":" + std::to_string(lineno) + ": face index out of range");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return mesh;
}

}  // namespace dfield
