#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hcma/error.hpp"
#include "hcma/scenegen.hpp"

namespace hcma::scenegen {
namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError(std::string(what) + " must be a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json raster_json(const Raster& r) {
  json indices = json::array(), values = json::array();
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    if (r.data[i] != 0.0) {
      indices.push_back(i);
      values.push_back(r.data[i]);
    }
  }
  return {{"height", r.height}, {"width", r.width}, {"channels", r.channels},
          {"indices", indices}, {"values", values}};
}

Raster raster_from(const json& j) {
  Raster r(j.at("height").get<int>(), j.at("width").get<int>(),
           j.at("channels").get<int>());
  const auto& idx = j.at("indices");
  const auto& val = j.at("values");
  if (idx.size() != val.size()) throw ParseError("raster indices/values length differ");
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto i = idx[k].get<std::size_t>();
    if (i >= r.data.size()) throw ParseError("raster index out of range");
    r.data[i] = val[k].get<double>();
  }
  return r;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json points = json::array();
  for (const Vec3& p : scene.points) points.push_back(vec_json(p));
  json objects = json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"center", vec_json(o.box.center)},
                       {"size", vec_json(o.box.size)},
                       {"heading", o.box.heading},
                       {"class", o.class_index}});
  }
  json views = json::array();
  for (const auto& v : scene.views) {
    views.push_back({{"M", v.M}, {"raster", raster_json(v.image)}});
  }
  const json j = {{"label", scene.label},   {"points", points},
                  {"objects", objects},     {"views", views},
                  {"vocab", scene.vocabulary}};
  return j.dump();
}

Scene scene_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  try {
    Scene s;
    s.label = j.at("label").get<std::string>();
    for (const auto& p : j.at("points")) s.points.push_back(vec_from(p, "point"));
    s.vocabulary = j.at("vocab").get<std::vector<std::string>>();
    for (const auto& o : j.at("objects")) {
      const int cls = o.at("class").get<int>();
      if (cls < 0 || cls >= static_cast<int>(s.vocabulary.size())) {
        throw ParseError("object class outside vocabulary");
      }
      s.objects.push_back({geometry::Box3D::make(vec_from(o.at("center"), "center"),
                                                 vec_from(o.at("size"), "size"),
                                                 o.at("heading").get<double>()),
                           cls});
    }
    for (const auto& v : j.at("views")) {
      CameraView view;
      const auto m = v.at("M").get<std::vector<double>>();
      if (m.size() != 12) throw ParseError("view M must hold 12 numbers");
      std::copy(m.begin(), m.end(), view.M.begin());
      view.image = raster_from(v.at("raster"));
      view.scene_label = s.label;
      s.views.push_back(std::move(view));
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<Scene>& scenes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const Scene& s : scenes) out << scene_to_json(s) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<Scene> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<Scene> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(scene_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

}  // namespace hcma::scenegen
