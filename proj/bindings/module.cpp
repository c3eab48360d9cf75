#include <cstring>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "magicforge/backends.hpp"
#include "magicforge/gradcheck.hpp"
#include "magicforge/losses.hpp"
#include "magicforge/metrics.hpp"
#include "magicforge/pipeline.hpp"
#include "magicforge/prompt.hpp"
#include "magicforge/sampler.hpp"
#include "magicforge/trainer.hpp"

namespace py = pybind11;
using namespace magicforge;

namespace {

Image image_from_numpy(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3)
        throw std::invalid_argument("image must be an HxWx3 uint8 array");
    Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
    std::memcpy(img.pixels.data(), arr.data(), img.pixels.size());
    return img;
}

py::array_t<std::uint8_t> image_to_numpy(const Image& img) {
    py::array_t<std::uint8_t> arr({img.height, img.width, 3});
    std::memcpy(arr.mutable_data(), img.pixels.data(), img.pixels.size());
    return arr;
}

Tensor3 tensor_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 3) throw std::invalid_argument("tensor must be m x H x W");
    Tensor3 t(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
              static_cast<int>(arr.shape(2)));
    std::memcpy(t.v.data(), arr.data(), t.size() * sizeof(double));
    return t;
}

py::array_t<double> tensor_to_numpy(const Tensor3& t) {
    py::array_t<double> arr({t.planes, t.height, t.width});
    std::memcpy(arr.mutable_data(), t.v.data(), t.size() * sizeof(double));
    return arr;
}

py::array_t<std::uint8_t> grid_to_numpy(const std::vector<std::uint8_t>& grid, int h, int w) {
    py::array_t<std::uint8_t> arr({h, w});
    std::memcpy(arr.mutable_data(), grid.data(), grid.size());
    return arr;
}

LabelGrid labels_from_numpy(py::array_t<int, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("label grid must be H x W");
    LabelGrid g(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
    std::memcpy(g.labels.data(), arr.data(), g.labels.size() * sizeof(int));
    return g;
}

py::array_t<int> labels_to_numpy(const LabelGrid& g) {
    py::array_t<int> arr({g.height, g.width});
    std::memcpy(arr.mutable_data(), g.labels.data(), g.labels.size() * sizeof(int));
    return arr;
}

DetectionBox box_from_dict(const py::dict& d) {
    DetectionBox b;
    b.category = d["category"].cast<std::string>();
    b.x0 = d["x0"].cast<double>();
    b.y0 = d["y0"].cast<double>();
    b.x1 = d["x1"].cast<double>();
    b.y1 = d["y1"].cast<double>();
    if (d.contains("confidence")) b.confidence = d["confidence"].cast<double>();
    return b;
}

py::dict box_to_dict(const DetectionBox& b) {
    py::dict d;
    d["category"] = b.category;
    d["x0"] = b.x0;
    d["y0"] = b.y0;
    d["x1"] = b.x1;
    d["y1"] = b.y1;
    d["confidence"] = b.confidence;
    return d;
}

py::dict report_to_dict(const MetricReport& r) {
    py::dict d;
    d["mean_iou"] = r.mean_iou;
    d["images"] = r.images;
    py::dict per;
    for (const auto& [c, iou] : r.per_category_iou) per[py::int_(c)] = iou;
    d["per_category_iou"] = per;
    return d;
}

}  // namespace

PYBIND11_MODULE(_magicforge, m) {
    m.doc() = "Counterfactual synthetic segmentation pipeline: core operations";

    py::class_<Vocabulary>(m, "Vocabulary")
        .def(py::init<std::vector<std::string>>())
        .def_static("load", &Vocabulary::load)
        .def("__len__", &Vocabulary::size)
        .def("names", &Vocabulary::names)
        .def("name", &Vocabulary::name)
        .def("id_of", &Vocabulary::id_of);

    py::class_<ClassMask>(m, "ClassMask")
        .def_readonly("category_id", &ClassMask::category_id)
        .def_readonly("width", &ClassMask::width)
        .def_readonly("height", &ClassMask::height)
        .def_readonly("runs", &ClassMask::runs);

    m.def("rle_encode",
          [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> grid,
             int category_id) {
              if (grid.ndim() != 2) throw std::invalid_argument("grid must be H x W");
              std::span<const std::uint8_t> span(grid.data(),
                                                 static_cast<std::size_t>(grid.size()));
              return rle_encode(span, static_cast<int>(grid.shape(1)),
                                static_cast<int>(grid.shape(0)), category_id);
          },
          py::arg("grid"), py::arg("category_id") = 0);
    m.def("rle_decode", [](const ClassMask& mask) {
        return grid_to_numpy(rle_decode(mask), mask.height, mask.width);
    });

    m.def("build_instruction",
          [](const std::vector<std::string>& categories, int count,
             std::optional<std::vector<std::string>> conditions) {
              ConditionSet cs = conditions ? ConditionSet{*conditions} : ConditionSet::defaults();
              return build_instruction(categories, cs, count);
          },
          py::arg("categories"), py::arg("count") = 1, py::arg("conditions") = py::none());
    m.def("counterfactualize",
          [](const std::string& text, const std::vector<std::string>& categories) {
              auto r = counterfactualize(text, categories);
              return py::make_tuple(r.text, r.substituted);
          });
    m.def("template_fallback", &template_fallback);
    m.def("contains_category", &contains_category);

    m.def("sample_categories",
          [](const std::vector<int>& known, const Vocabulary& vocab, std::size_t m_subset,
             std::uint64_t seed) {
              Rng rng(seed);
              auto s = sample_categories(known, vocab, m_subset, rng);
              return py::make_tuple(s.ids, s.known);
          },
          py::arg("known"), py::arg("vocab"), py::arg("m"), py::arg("seed"));

    m.def("focal_loss",
          [](py::array_t<double> pred, py::array_t<double> gt, double alpha) {
              auto r = focal_loss(tensor_from_numpy(pred), tensor_from_numpy(gt), alpha);
              return py::make_tuple(r.value, tensor_to_numpy(r.grad));
          },
          py::arg("pred"), py::arg("gt"), py::arg("alpha") = 2.0);
    m.def("dice_loss", [](py::array_t<double> pred, py::array_t<double> gt) {
        auto r = dice_loss(tensor_from_numpy(pred), tensor_from_numpy(gt));
        return py::make_tuple(r.value, tensor_to_numpy(r.grad));
    });
    m.def("counterfactual_cosine_loss",
          [](const std::vector<double>& a, const std::vector<double>& b) {
              auto r = counterfactual_cosine_loss(a, b);
              return py::make_tuple(r.value, r.grad_cls, r.grad_co);
          });
    m.def("total_loss",
          [](py::array_t<double> pred, py::array_t<double> gt, const std::vector<double>& p_cls,
             const std::vector<double>& p_co, double w1, double w2, double w3, double alpha) {
              LossWeights w{w1, w2, w3, alpha};
              auto r = total_loss(tensor_from_numpy(pred), tensor_from_numpy(gt), p_cls, p_co, w);
              py::dict d;
              d["value"] = r.value;
              d["focal"] = r.focal;
              d["dice"] = r.dice;
              d["cosine"] = r.cosine;
              d["grad_pred"] = tensor_to_numpy(r.grad_pred);
              d["grad_cls"] = r.grad_cls;
              d["grad_co"] = r.grad_co;
              return d;
          },
          py::arg("pred"), py::arg("gt"), py::arg("p_cls"), py::arg("p_co"), py::arg("w1") = 100.0,
          py::arg("w2") = 1.0, py::arg("w3") = 1.0, py::arg("alpha") = 2.0);

    m.def("assign_labels",
          [](py::array_t<double> pred, const std::vector<int>& ids, double bg_threshold) {
              return labels_to_numpy(assign_labels(tensor_from_numpy(pred), ids, bg_threshold));
          },
          py::arg("pred"), py::arg("category_ids"), py::arg("bg_threshold") = 0.95);
    m.def("miou",
          [](const std::vector<py::array_t<int, py::array::c_style | py::array::forcecast>>& pred,
             const std::vector<py::array_t<int, py::array::c_style | py::array::forcecast>>& gt,
             const std::vector<int>& categories) {
              std::vector<LabelGrid> p, g;
              for (const auto& a : pred) p.push_back(labels_from_numpy(a));
              for (const auto& a : gt) g.push_back(labels_from_numpy(a));
              return report_to_dict(miou(p, g, categories));
          });
    m.def("p_miou",
          [](const std::vector<py::array_t<int, py::array::c_style | py::array::forcecast>>& pred,
             const std::vector<py::array_t<int, py::array::c_style | py::array::forcecast>>& gt,
             const std::vector<int>& categories, std::size_t points, std::uint64_t seed) {
              std::vector<LabelGrid> p, g;
              for (const auto& a : pred) p.push_back(labels_from_numpy(a));
              for (const auto& a : gt) g.push_back(labels_from_numpy(a));
              Rng rng(seed);
              return report_to_dict(p_miou(p, g, categories, points, rng));
          },
          py::arg("pred"), py::arg("gt"), py::arg("categories"), py::arg("points") = 256,
          py::arg("seed") = 0);

    py::class_<MockBackend>(m, "MockBackend")
        .def(py::init([](const Vocabulary& vocab, int width, int height, double jitter,
                         double dropout, std::uint64_t noise_seed) {
                 return MockBackend(vocab, MockNoise{jitter, dropout, noise_seed}, width, height);
             }),
             py::arg("vocab"), py::arg("width") = 512, py::arg("height") = 512,
             py::arg("box_jitter_sigma") = 0.0, py::arg("dropout_prob") = 0.0,
             py::arg("noise_seed") = 0)
        .def("generate_text", &MockBackend::generate_text)
        .def("generate_image",
             [](MockBackend& b, const std::string& text, std::uint64_t seed) {
                 return image_to_numpy(b.generate_image(text, seed));
             })
        .def("detect",
             [](MockBackend& b, py::array_t<std::uint8_t> image,
                const std::vector<std::string>& categories) {
                 py::list out;
                 for (const auto& box : b.detect(image_from_numpy(image), categories))
                     out.append(box_to_dict(box));
                 return out;
             })
        .def("segment", [](MockBackend& b, py::array_t<std::uint8_t> image, const py::dict& box) {
            Image img = image_from_numpy(image);
            return grid_to_numpy(b.segment(img, box_from_dict(box)), img.height, img.width);
        });

    py::class_<ToyModelState>(m, "Model")
        .def_static("load", &ToyModelState::load)
        .def_static("init", &ToyModelState::init, py::arg("num_categories"), py::arg("embed_dim"),
                    py::arg("seed") = 0)
        .def_readonly("embed_dim", &ToyModelState::embed_dim)
        .def_readonly("num_categories", &ToyModelState::num_categories)
        .def_property_readonly("W", [](const ToyModelState& s) { return s.W; })
        .def_property_readonly("E", [](const ToyModelState& s) { return s.E; })
        .def_property_readonly("b", [](const ToyModelState& s) { return s.b; })
        .def("predict",
             [](const ToyModelState& model, py::array_t<std::uint8_t> image,
                const std::vector<int>& ids) {
                 auto features = extract_features(image_from_numpy(image));
                 auto fwd = forward(model, features, ids);
                 return py::make_tuple(tensor_to_numpy(fwd.pred), fwd.token);
             });

    m.def("extract_features", [](py::array_t<std::uint8_t> image) {
        auto f = extract_features(image_from_numpy(image));
        py::array_t<double> arr({f.height, f.width, kFeatureDim});
        std::memcpy(arr.mutable_data(), f.v.data(), f.v.size() * sizeof(double));
        return arr;
    });

    m.def("run_gradcheck",
          [](int seeds) {
              auto r = run_gradcheck(seeds);
              py::dict d;
              d["focal"] = r.focal_max_rel_err;
              d["dice"] = r.dice_max_rel_err;
              d["cosine"] = r.cosine_max_rel_err;
              d["end_to_end"] = r.end_to_end_max_rel_err;
              d["pass"] = r.pass();
              return d;
          },
          py::arg("seeds") = 10);
}
