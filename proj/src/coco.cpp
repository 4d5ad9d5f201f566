#include "bowl/coco.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "bowl/error.hpp"

namespace bowl {
namespace {

using nlohmann::json;

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("'" + path.string() + "': no such file or unreadable");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(FormatErrorKind::kInvalidField, "'" + path.string() + "': " + e.what());
  }
}

Box parse_bbox(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw FormatError(FormatErrorKind::kInvalidField, where + ": bbox must be [x,y,w,h]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw FormatError(FormatErrorKind::kInvalidField, where + ": bbox needs positive width and height");
  return b;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

const CocoImage* CocoDataset::find_image(std::uint64_t id) const {
  for (const auto& img : images)
    if (img.id == id) return &img;
  return nullptr;
}

std::vector<GtRecord> CocoDataset::annotations_for(std::uint64_t image_id) const {
  std::vector<GtRecord> out;
  for (const auto& a : annotations)
    if (a.image_id == image_id) out.push_back(a);
  return out;
}

CocoDataset read_coco(const std::filesystem::path& path) {
  const json root = load_json(path);
  const std::string where = "'" + path.string() + "'";
  CocoDataset ds;
  try {
    for (const auto& img : root.at("images"))
      ds.images.push_back({img.at("id").get<std::uint64_t>(), img.at("width").get<int>(), img.at("height").get<int>()});
    std::map<int, bool> base;
    if (root.contains("categories")) {
      for (const auto& c : root.at("categories")) {
        CocoCategory cat;
        cat.id = c.at("id").get<int>();
        cat.name = c.value("name", std::string{});
        const std::string split = c.value("split", std::string("base"));
        if (split != "base" && split != "novel")
          throw FormatError(FormatErrorKind::kInvalidField, where + ": category split must be base or novel");
        cat.is_base = split == "base";
        base[cat.id] = cat.is_base;
        ds.categories.push_back(cat);
      }
    }
    std::set<std::uint64_t> ids;
    for (const auto& img : ds.images) ids.insert(img.id);
    for (const auto& a : root.at("annotations")) {
      GtRecord g;
      g.image_id = a.at("image_id").get<std::uint64_t>();
      if (!ids.count(g.image_id))
        throw FormatError(FormatErrorKind::kInvalidField, where + ": annotation for unknown image " + std::to_string(g.image_id));
      g.gt.box = parse_bbox(a.at("bbox"), where);
      g.gt.class_id = a.at("category_id").get<int>();
      if (g.gt.class_id < 0) throw FormatError(FormatErrorKind::kInvalidField, where + ": negative category_id");
      const auto it = base.find(g.gt.class_id);
      g.gt.is_base = it == base.end() ? true : it->second;
      ds.annotations.push_back(g);
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatErrorKind::kInvalidField, where + ": " + e.what());
  }
  return ds;
}

void write_coco(const CocoDataset& ds, const std::filesystem::path& path) {
  json root;
  root["images"] = json::array();
  for (const auto& img : ds.images) root["images"].push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
  root["categories"] = json::array();
  for (const auto& c : ds.categories)
    root["categories"].push_back({{"id", c.id}, {"name", c.name}, {"split", c.is_base ? "base" : "novel"}});
  root["annotations"] = json::array();
  std::uint64_t next_id = 1;
  for (const auto& a : ds.annotations) {
    const Box& b = a.gt.box;
    root["annotations"].push_back({{"id", next_id++},
                                   {"image_id", a.image_id},
                                   {"bbox", {b.x, b.y, b.w, b.h}},
                                   {"area", b.area()},
                                   {"category_id", a.gt.class_id},
                                   {"iscrowd", 0}});
  }
  write_json(root, path);
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  const json root = load_json(path);
  const std::string where = "'" + path.string() + "'";
  const json& list = root.is_array() ? root : root.at("annotations");
  std::vector<Detection> out;
  try {
    for (const auto& d : list) {
      Detection det;
      det.image_id = d.at("image_id").get<std::uint64_t>();
      det.box = parse_bbox(d.at("bbox"), where);
      det.score = d.at("score").get<double>();
      if (!std::isfinite(det.score)) throw FormatError(FormatErrorKind::kInvalidField, where + ": non-finite score");
      out.push_back(det);
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatErrorKind::kInvalidField, where + ": " + e.what());
  }
  return out;
}

void write_detections(std::span<const Detection> dets, const std::filesystem::path& path) {
  json list = json::array();
  for (const auto& d : dets)
    list.push_back({{"image_id", d.image_id}, {"bbox", {d.box.x, d.box.y, d.box.w, d.box.h}}, {"score", d.score},
                    {"category_id", 1}});
  write_json(list, path);
}

}  // namespace bowl
