#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

#include "gabornet/data.hpp"
#include "gabornet/gradcheck.hpp"
#include "gabornet/network.hpp"
#include "gabornet/optim.hpp"
#include "gabornet/train.hpp"

namespace py = pybind11;
using namespace gabornet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor4 to_tensor(const Array& a) {
  if (a.ndim() != 4) throw std::invalid_argument("expected a 4-d array (n, c, h, w)");
  const Shape4 s{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                 static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3))};
  return Tensor4(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor4& t) {
  const Shape4& s = t.shape();
  Array out({s.n, s.c, s.h, s.w});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Array kernel_array(const KernelMatrix& k) {
  Array out({k.size, k.size});
  std::copy(k.values.begin(), k.values.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

}  // namespace

PYBIND11_MODULE(_gabornet, m) {
  m.doc() = "GaborNet core: Gabor kernels, convolution, datasets and training";

  m.def("eval_gabor",
        [](double x, double y, double omega, double theta, double psi, double sigma) {
          return eval_gabor(x, y, {omega, theta, psi, sigma});
        },
        py::arg("x"), py::arg("y"), py::arg("omega"), py::arg("theta"), py::arg("psi"),
        py::arg("sigma"));

  m.def("make_kernel",
        [](double omega, double theta, double psi, double sigma, int k) {
          return kernel_array(make_kernel({omega, theta, psi, sigma}, k));
        },
        py::arg("omega"), py::arg("theta"), py::arg("psi"), py::arg("sigma"), py::arg("k"),
        "k x k real Gabor kernel centred on the middle pixel; rows are y, columns are x.");

  m.def("kernel_param_grads",
        [](double omega, double theta, double psi, double sigma, int k) {
          const KernelParamGrads g = kernel_param_grads({omega, theta, psi, sigma}, k);
          py::dict d;
          d["omega"] = kernel_array(g.d_omega);
          d["theta"] = kernel_array(g.d_theta);
          d["psi"] = kernel_array(g.d_psi);
          d["sigma"] = kernel_array(g.d_sigma);
          return d;
        },
        py::arg("omega"), py::arg("theta"), py::arg("psi"), py::arg("sigma"), py::arg("k"));

  m.def("build_filter_bank",
        [] {
          const FilterBank bank = build_filter_bank();
          Array out({static_cast<py::ssize_t>(bank.size()), py::ssize_t{2}});
          auto r = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < bank.size(); ++i) {
            r(i, 0) = bank[i].omega;
            r(i, 1) = bank[i].theta;
          }
          return out;
        },
        "(40, 2) array of (omega, theta), scale-major.");

  m.def("init_param_set",
        [](int c_out, int c_in, int k, std::uint64_t seed) {
          const GaborParamSet set = init_param_set(c_out, c_in, k, seed);
          Array out({c_out, c_in, 4});
          auto r = out.mutable_unchecked<3>();
          for (int o = 0; o < c_out; ++o) {
            for (int i = 0; i < c_in; ++i) {
              const GaborParams& p = set.at(o, i);
              r(o, i, 0) = p.omega;
              r(o, i, 1) = p.theta;
              r(o, i, 2) = p.psi;
              r(o, i, 3) = p.sigma;
            }
          }
          return out;
        },
        py::arg("c_out"), py::arg("c_in"), py::arg("k"), py::arg("seed"),
        "(c_out, c_in, 4) array of (omega, theta, psi, sigma).");

  m.def("conv2d_forward",
        [](const Array& x, const Array& kernels, const Array& bias, int stride, int pad) {
          const Tensor4 k = to_tensor(kernels);
          return to_array(conv2d_forward(to_tensor(x), k, to_vector(bias),
                                         {k.shape().h, stride, pad}));
        },
        py::arg("x"), py::arg("kernels"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("pad") = 0);

  m.def("conv2d_naive",
        [](const Array& x, const Array& kernels, const Array& bias, int stride, int pad) {
          const Tensor4 k = to_tensor(kernels);
          return to_array(conv2d_naive(to_tensor(x), k, to_vector(bias),
                                       {k.shape().h, stride, pad}));
        },
        py::arg("x"), py::arg("kernels"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("pad") = 0);

  m.def("maxpool2d",
        [](const Array& x, int window, int stride) {
          const MaxPoolResult r = maxpool2d(to_tensor(x), window, stride);
          return py::make_tuple(to_array(r.output), r.argmax);
        },
        py::arg("x"), py::arg("window"), py::arg("stride"));

  m.def("adam_step",
        [](const Array& param, const Array& grad, const Array& m1, const Array& m2,
           std::int64_t t, double lr, double beta1, double beta2, double eps) {
          Tensor4 p = to_tensor(param);
          AdamState state{to_tensor(m1), to_tensor(m2), t};
          adam_step(state, {lr, beta1, beta2, eps}, p, to_tensor(grad));
          return py::make_tuple(to_array(p), to_array(state.m), to_array(state.v), state.t);
        },
        py::arg("param"), py::arg("grad"), py::arg("m"), py::arg("v"), py::arg("t"),
        py::arg("lr") = 1e-3, py::arg("beta1") = 0.9, py::arg("beta2") = 0.999,
        py::arg("eps") = 1e-8,
        "One bias-corrected Adam update on 4-d arrays; returns (param, m, v, t).");

  m.def("gen_texture_dataset",
        [](int n_per_class, int size, int classes, double noise, std::uint64_t seed) {
          LabeledDataset ds = gen_texture_dataset(n_per_class, size, classes, noise, seed);
          return py::make_tuple(to_array(ds.images),
                                py::array_t<int>(ds.labels.size(), ds.labels.data()));
        },
        py::arg("n_per_class"), py::arg("size") = 32, py::arg("classes") = 4,
        py::arg("noise") = 0.05, py::arg("seed") = 7);

  m.def("gradcheck",
        [](std::uint64_t seed, const std::string& group) {
          GradcheckOptions o;
          o.seed = seed;
          o.group = group;
          py::list out;
          for (const CheckResult& r : run_gradcheck(o)) {
            py::dict d;
            d["group"] = r.group;
            d["name"] = r.name;
            d["configurations"] = r.configurations;
            d["max_error"] = r.max_error;
            d["passed"] = r.passed;
            out.append(d);
          }
          return out;
        },
        py::arg("seed") = 0, py::arg("group") = "");

  m.def("default_gcnn_layers",
        [](int classes) { return format_layers(default_gcnn_spec(classes).layers); },
        py::arg("classes") = 4);

  py::class_<Network>(m, "Network")
      .def(py::init([](const std::string& layers, int classes, int channels, int size,
                       std::uint64_t seed, bool cnn) {
             NetworkSpec spec = default_gcnn_spec(classes, channels, size, seed);
             if (!layers.empty()) spec.layers = parse_layers(layers);
             return std::make_unique<Network>(cnn ? cnn_twin(spec) : spec);
           }),
           py::arg("layers") = "", py::arg("classes") = 4, py::arg("channels") = 1,
           py::arg("size") = 32, py::arg("seed") = 0, py::arg("cnn_twin") = false)
      .def("forward",
           [](Network& net, const Array& x, bool training) {
             return to_array(net.forward(to_tensor(x), training ? Mode::kTrain : Mode::kInference));
           },
           py::arg("x"), py::arg("training") = false, "Returns (n, classes, 1, 1) logits.")
      .def("parameter_count", &Network::parameter_count)
      .def("first_layer_counts",
           [](Network& net) {
             const FirstLayerCount c = first_layer_parameter_count(net);
             return py::make_tuple(c.kind, c.with_bias, c.weights_only);
           })
      .def("filters",
           [](Network& net) {
             const FilterGrid g = render_filters(net);
             py::array_t<std::uint8_t> img({g.image.height, g.image.width});
             std::copy(g.image.pixels.begin(), g.image.pixels.end(), img.mutable_data());
             return img;
           },
           "First-layer kernels as an 8-bit grid image.")
      .def("fit",
           [](Network& net, const Array& x, const std::vector<int>& labels, int epochs,
              int batch_size, double lr, std::uint64_t seed) {
             LabeledDataset ds;
             ds.images = to_tensor(x);
             ds.labels = labels;
             ds.class_names.resize(net.spec().classes);
             Adam adam({lr, 0.9, 0.999, 1e-8});
             TrainOptions opts;
             opts.batch_size = batch_size;
             opts.seed = seed;
             opts.base_lr = lr;
             std::vector<double> losses;
             for (int e = 1; e <= epochs; ++e) losses.push_back(train_epoch(net, adam, ds, opts, e).train_loss);
             return losses;
           },
           py::arg("x"), py::arg("labels"), py::arg("epochs") = 1, py::arg("batch_size") = 64,
           py::arg("lr") = 1e-3, py::arg("seed") = 0,
           "Trains with Adam and returns the mean training loss of each epoch.")
      .def("evaluate", [](Network& net, const Array& x, const std::vector<int>& labels) {
        LabeledDataset ds;
        ds.images = to_tensor(x);
        ds.labels = labels;
        const EvalResult r = evaluate(net, ds);
        return py::make_tuple(r.loss, r.accuracy);
      });
}
