#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "groundhog/commands.h"
#include "groundhog/errors.h"
#include "groundhog/logging.h"
#include "groundhog/mask.h"

namespace py = pybind11;
namespace gh = groundhog;

namespace {

using Path = std::filesystem::path;

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

gh::BinaryMask mask_from_array(const py::array& a) {
  const auto arr = py::array_t<bool, py::array::c_style | py::array::forcecast>::ensure(a);
  if (!arr || arr.ndim() != 2) throw gh::DimensionError("mask must be a 2-D array");
  const int h = static_cast<int>(arr.shape(0)), w = static_cast<int>(arr.shape(1));
  gh::BinaryMask m(h, w);
  const bool* d = arr.data();
  for (int i = 0; i < h * w; ++i) m.set(i / w, i % w, d[i]);
  return m;
}

gh::ProposalSet proposals_from_array(const py::array& a) {
  const auto arr = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(a);
  if (!arr || arr.ndim() != 3) throw gh::DimensionError("proposals must be a Q x H x W array");
  const int q = static_cast<int>(arr.shape(0));
  const int h = static_cast<int>(arr.shape(1)), w = static_cast<int>(arr.shape(2));
  gh::ProposalSet set;
  const double* d = arr.data();
  for (int k = 0; k < q; ++k) {
    std::vector<double> probs(d + static_cast<std::size_t>(k) * h * w,
                              d + static_cast<std::size_t>(k + 1) * h * w);
    set.add(gh::SoftMask(h, w, std::move(probs)), gh::ProposalTag::kOracle);
  }
  return set;
}

}  // namespace

PYBIND11_MODULE(groundhog, m) {
  m.doc() = "Entity-grounded masks from a toy multimodal language model.";
  gh::configure_logging();

  auto base = py::register_exception<gh::Error>(m, "GroundhogError", PyExc_RuntimeError);
  py::register_exception<gh::DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<gh::InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<gh::EmptyMaskError>(m, "EmptyMaskError", base.ptr());
  py::register_exception<gh::DataError>(m, "DataError", base.ptr());
  py::register_exception<gh::NumericError>(m, "NumericError", base.ptr());

  m.def(
      "gen_data",
      [](const Path& out, int n, std::optional<std::uint64_t> seed, std::optional<Path> config) {
        gh::GenDataOptions o;
        o.out = out;
        o.n = n;
        o.seed = seed;
        o.config = config;
        return to_python(nlohmann::json(gh::cmd_gen_data(o)));
      },
      py::arg("out"), py::arg("n") = 100, py::arg("seed") = py::none(),
      py::arg("config") = py::none());

  m.def(
      "train",
      [](const std::vector<Path>& corpus, const Path& out_ckpt, std::optional<Path> config,
         std::optional<Path> resume, std::optional<std::uint64_t> seed,
         std::optional<int> epochs, std::optional<int> threads) {
        gh::TrainCmdOptions o;
        o.corpus = corpus;
        o.out_ckpt = out_ckpt;
        o.config = config;
        o.resume = resume;
        o.seed = seed;
        o.epochs = epochs;
        o.threads = threads;
        gh::TrainSummary s;
        {
          py::gil_scoped_release release;
          s = gh::cmd_train(o);
        }
        return to_python({{"checkpoint", out_ckpt.string()},
                          {"steps", s.steps},
                          {"epochs", s.epochs},
                          {"first", s.first},
                          {"last", s.last}});
      },
      py::arg("corpus"), py::arg("out_ckpt"), py::arg("config") = py::none(),
      py::arg("resume") = py::none(), py::arg("seed") = py::none(),
      py::arg("epochs") = py::none(), py::arg("threads") = py::none());

  m.def(
      "evaluate",
      [](const Path& corpus, std::optional<Path> ckpt, std::vector<std::string> metrics,
         std::optional<Path> predictions_in, std::optional<Path> predictions_out,
         int max_new_tokens) {
        if (!ckpt && !predictions_in)
          throw gh::InvalidArgument("evaluate needs ckpt or predictions_in");
        gh::EvalOptions o;
        o.corpus = corpus;
        if (ckpt) o.ckpt = *ckpt;
        o.metrics = std::move(metrics);
        o.predictions_in = predictions_in;
        o.predictions_out = predictions_out;
        o.decode.max_new_tokens = max_new_tokens;
        return to_python(gh::cmd_eval(o));
      },
      py::arg("corpus"), py::arg("ckpt") = py::none(),
      py::arg("metrics") = std::vector<std::string>{}, py::arg("predictions_in") = py::none(),
      py::arg("predictions_out") = py::none(), py::arg("max_new_tokens") = 48);

  m.def(
      "ground",
      [](const Path& ckpt, const Path& scene, const std::string& text, int max_new_tokens) {
        gh::GroundOptions o{ckpt, scene, text, {max_new_tokens}};
        return to_python(gh::cmd_ground(o));
      },
      py::arg("ckpt"), py::arg("scene"), py::arg("text"), py::arg("max_new_tokens") = 48);

  m.def(
      "diagnose",
      [](const Path& ckpt, const Path& scene, const std::string& text, int topk,
         std::optional<Path> ppm_dir, int max_new_tokens) {
        gh::DiagnoseOptions o{ckpt, scene, text, topk, ppm_dir, {max_new_tokens}};
        return to_python(gh::cmd_diagnose(o));
      },
      py::arg("ckpt"), py::arg("scene"), py::arg("text"), py::arg("topk") = 5,
      py::arg("ppm_dir") = py::none(), py::arg("max_new_tokens") = 48);

  m.def(
      "iou_mask",
      [](const py::array& a, const py::array& b) {
        return gh::iou_mask(mask_from_array(a), mask_from_array(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "merge_proposals",
      [](const std::vector<double>& scores, const py::array& proposals) {
        const gh::ProposalSet set = proposals_from_array(proposals);
        const gh::SoftMask merged = gh::merge_proposals(scores, set);
        py::array_t<double> out({merged.height(), merged.width()});
        std::copy(merged.probs().begin(), merged.probs().end(), out.mutable_data());
        return out;
      },
      py::arg("scores"), py::arg("proposals"));

  m.def(
      "best_match",
      [](const py::object& pointer, const py::array& proposals) {
        const gh::ProposalSet set = proposals_from_array(proposals);
        if (py::isinstance<py::tuple>(pointer) || py::isinstance<py::list>(pointer)) {
          const auto b = pointer.cast<std::vector<int>>();
          if (b.size() != 4) throw gh::InvalidArgument("box pointer needs x0, y0, x1, y1");
          return gh::best_match(gh::Box(b[0], b[1], b[2], b[3]), set);
        }
        return gh::best_match(mask_from_array(pointer.cast<py::array>()), set);
      },
      py::arg("pointer"), py::arg("proposals"));

  m.def(
      "rle_encode",
      [](const py::array& mask) { return to_python(nlohmann::json(gh::rle_encode(mask_from_array(mask)))); },
      py::arg("mask"));
}
