#include "groundhog/corpus.h"

#include <fstream>

#include "groundhog/errors.h"

namespace groundhog {

using nlohmann::json;

namespace {

BinaryMask mask_from_json(const json& j, int h, int w) {
  BinaryMask m = rle_decode(j.get<RleMask>());
  if (m.height() != h || m.width() != w) throw DataError("mask size differs from scene");
  return m;
}

}  // namespace

json scene_to_json(const Scene& s) {
  std::string colors;
  colors.reserve(s.colors.size());
  for (auto c : s.colors) colors.push_back(static_cast<char>('0' + c));
  json ents = json::array();
  for (const Entity& e : s.entities) {
    json parts = json::array();
    for (const Part& p : e.parts) parts.push_back({{"name", p.name}, {"mask", rle_encode(p.mask)}});
    ents.push_back({{"color", kColorNames[e.color]},
                    {"shape", to_string(e.shape)},
                    {"region", to_string(e.region)},
                    {"mask", rle_encode(e.mask)},
                    {"parts", parts}});
  }
  return {{"h", s.height}, {"w", s.width}, {"horizon", s.horizon},
          {"colors", colors}, {"entities", ents}};
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.height = j.at("h").get<int>();
  s.width = j.at("w").get<int>();
  s.horizon = j.at("horizon").get<int>();
  const auto colors = j.at("colors").get<std::string>();
  if (colors.size() != static_cast<std::size_t>(s.height) * s.width)
    throw DataError("scene colors length does not match h*w");
  for (char ch : colors) {
    if (ch < '0' || ch > '0' + kNumColors) throw DataError("invalid scene color code");
    s.colors.push_back(static_cast<std::uint8_t>(ch - '0'));
  }
  for (const json& je : j.at("entities")) {
    Entity e;
    e.color = color_from_string(je.at("color").get<std::string>());
    e.shape = shape_from_string(je.at("shape").get<std::string>());
    e.region = region_from_string(je.at("region").get<std::string>());
    e.mask = mask_from_json(je.at("mask"), s.height, s.width);
    if (je.contains("parts")) {
      for (const json& jp : je.at("parts"))
        e.parts.push_back({jp.at("name").get<std::string>(),
                           mask_from_json(jp.at("mask"), s.height, s.width)});
    }
    s.entities.push_back(std::move(e));
  }
  return s;
}

json proposals_to_json(const ProposalSet& p) {
  json out = json::array();
  for (std::size_t q = 0; q < p.size(); ++q) {
    out.push_back({{"mask", rle_encode(binarize(p[q]))}, {"tag", to_string(p.tags()[q])}});
  }
  return out;
}

ProposalSet proposals_from_json(const json& j) {
  ProposalSet out;
  for (const json& jp : j) {
    out.add(SoftMask::from_binary(rle_decode(jp.at("mask").get<RleMask>())),
            proposal_tag_from_string(jp.value("tag", std::string("oracle"))));
  }
  return out;
}

json pointer_to_json(const Pointer& p) {
  if (const Box* b = std::get_if<Box>(&p)) return *b;
  return rle_encode(std::get<BinaryMask>(p));
}

Pointer pointer_from_json(const json& j) {
  if (j.is_array()) return j.get<Box>();
  return rle_decode(j.get<RleMask>());
}

json conversation_to_json(const GroundedConversation& c) {
  json turns = json::array();
  for (const Turn& t : c.turns) {
    json jt = {{"role", to_string(t.role)}, {"text", t.text}};
    if (!t.pointers.empty()) {
      json ptrs = json::array();
      for (const auto& p : t.pointers) ptrs.push_back(pointer_to_json(p));
      jt["pointers"] = ptrs;
    }
    if (t.role == Role::kAssistant) {
      json spans = json::array();
      for (const GroundedSpan& s : t.spans) {
        json js = {{"grd", {s.grd_start, s.grd_end}}, {"supervision", to_string(s.supervision)}};
        if (s.supervision == Supervision::kMask) {
          json masks = json::array();
          for (const auto& m : s.masks) masks.push_back(rle_encode(m));
          js["masks"] = masks;
        } else if (s.supervision == Supervision::kBox) {
          js["boxes"] = s.boxes;
        }
        spans.push_back(js);
      }
      jt["spans"] = spans;
    }
    turns.push_back(jt);
  }
  return {{"schema", kCorpusSchema},
          {"id", c.id},
          {"task", to_string(c.task)},
          {"source", c.source},
          {"scene", scene_to_json(c.scene)},
          {"proposals", proposals_to_json(c.proposals)},
          {"turns", turns}};
}

GroundedConversation conversation_from_json(const json& j) {
  try {
    if (j.value("schema", std::string()) != kCorpusSchema) {
      throw DataError("schema must be \"" + std::string(kCorpusSchema) + "\"");
    }
    GroundedConversation c;
    c.id = j.at("id").get<std::int64_t>();
    c.task = task_from_string(j.at("task").get<std::string>());
    c.source = j.value("source", std::string(to_string(c.task)));
    c.scene = scene_from_json(j.at("scene"));
    c.proposals = proposals_from_json(j.at("proposals"));
    for (const json& jt : j.at("turns")) {
      Turn t;
      t.role = role_from_string(jt.at("role").get<std::string>());
      t.text = jt.at("text").get<std::string>();
      if (jt.contains("pointers"))
        for (const json& jp : jt.at("pointers")) t.pointers.push_back(pointer_from_json(jp));
      if (jt.contains("spans")) {
        for (const json& js : jt.at("spans")) {
          GroundedSpan s;
          const auto grd = js.at("grd").get<std::vector<int>>();
          if (grd.size() != 2) throw DataError("span grd must be [start, end]");
          s.grd_start = grd[0];
          s.grd_end = grd[1];
          s.supervision = supervision_from_string(js.at("supervision").get<std::string>());
          if (js.contains("masks"))
            for (const json& jm : js.at("masks"))
              s.masks.push_back(mask_from_json(jm, c.scene.height, c.scene.width));
          if (js.contains("boxes")) s.boxes = js.at("boxes").get<std::vector<Box>>();
          t.spans.push_back(std::move(s));
        }
      }
      c.turns.push_back(std::move(t));
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed conversation: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  } catch (const DimensionError& e) {
    throw DataError(e.what());
  }
}

void write_corpus(const std::filesystem::path& path,
                  std::span<const GroundedConversation> corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& c : corpus) out << conversation_to_json(c).dump() << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<GroundedConversation> read_corpus(const std::filesystem::path& path,
                                              const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  std::vector<GroundedConversation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      GroundedConversation c = conversation_from_json(json::parse(line));
      validate(c, vocab);
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace groundhog
