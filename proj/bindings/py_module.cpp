#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blockdyn/blockmodel.hpp"
#include "blockdyn/community.hpp"
#include "blockdyn/dynstate.hpp"
#include "blockdyn/errors.hpp"
#include "blockdyn/metrics.hpp"
#include "blockdyn/netbuild.hpp"
#include "blockdyn/synth.hpp"
#include "blockdyn/types.hpp"

namespace py = pybind11;
using namespace blockdyn;

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Shared community structure and recurring connectivity states in multilayer "
      "binary networks";

  py::register_exception<Error>(m, "BlockdynError", PyExc_RuntimeError);

  py::class_<Membership>(m, "Membership")
      .def(py::init<>())
      .def(py::init<std::vector<int>, int>(), py::arg("labels"), py::arg("k"))
      .def_static("from_labels", &Membership::from_labels, py::arg("labels"))
      .def_readwrite("labels", &Membership::labels)
      .def_readwrite("num_communities", &Membership::num_communities)
      .def("community_sizes", &Membership::community_sizes)
      .def("__len__", &Membership::size);

  m.def("canonicalize_labels", &canonicalize_labels, py::arg("labels"));

  py::class_<AdjacencyTensor>(m, "AdjacencyTensor")
      .def(py::init<>())
      .def(py::init<int, int>(), py::arg("subjects"), py::arg("times"))
      .def_readwrite("num_subjects", &AdjacencyTensor::num_subjects)
      .def_readwrite("num_times", &AdjacencyTensor::num_times)
      .def_readwrite("layers", &AdjacencyTensor::layers)
      .def("at", [](const AdjacencyTensor& t, int r, int s) { return t.at(r, s); },
           py::arg("subject"), py::arg("time"))
      .def("num_nodes", &AdjacencyTensor::num_nodes);

  // Network construction.
  py::class_<netbuild::TimeSeriesPanel>(m, "TimeSeriesPanel")
      .def(py::init<>())
      .def_readwrite("subject", &netbuild::TimeSeriesPanel::subject)
      .def_readwrite("values", &netbuild::TimeSeriesPanel::values);

  py::class_<netbuild::CorrelationSequence>(m, "CorrelationSequence")
      .def_readonly("matrices", &netbuild::CorrelationSequence::matrices)
      .def_readonly("window_length", &netbuild::CorrelationSequence::window_length)
      .def_readonly("step", &netbuild::CorrelationSequence::step)
      .def("__len__", &netbuild::CorrelationSequence::size);

  py::enum_<netbuild::TiePolicy>(m, "TiePolicy")
      .value("lexicographic", netbuild::TiePolicy::lexicographic)
      .value("strict", netbuild::TiePolicy::strict);

  m.def("sliding_window_correlation", &netbuild::sliding_window_correlation, py::arg("panel"),
        py::arg("window_length"), py::arg("step") = 1);
  m.def("proportional_threshold", &netbuild::proportional_threshold, py::arg("correlation"),
        py::arg("kappa"), py::arg("policy") = netbuild::TiePolicy::lexicographic);
  m.def("time_average", &netbuild::time_average, py::arg("sequence"));
  m.def("global_efficiency", &netbuild::global_efficiency, py::arg("w"));

  py::class_<netbuild::CostEfficiencyRow>(m, "CostEfficiencyRow")
      .def_readonly("kappa", &netbuild::CostEfficiencyRow::kappa)
      .def_readonly("global_efficiency", &netbuild::CostEfficiencyRow::global_efficiency)
      .def_readonly("modularity_remapped", &netbuild::CostEfficiencyRow::modularity_remapped)
      .def_readonly("cost_efficiency", &netbuild::CostEfficiencyRow::cost_efficiency);
  py::class_<netbuild::CostEfficiencyScan>(m, "CostEfficiencyScan")
      .def_readonly("kappa_star", &netbuild::CostEfficiencyScan::kappa_star)
      .def_readonly("table", &netbuild::CostEfficiencyScan::table);
  m.def("cost_efficiency_scan", &netbuild::cost_efficiency_scan, py::arg("correlation"),
        py::arg("grid"), py::arg("seed"));

  // Community detection.
  m.def("modularity", &community::modularity, py::arg("w"), py::arg("g"));
  m.def("modularity_gain", &community::modularity_gain, py::arg("w"), py::arg("g"),
        py::arg("node"), py::arg("target"));
  m.def("louvain", &community::louvain, py::arg("w"), py::arg("seed"));

  py::class_<community::LouvainResult>(m, "LouvainResult")
      .def_readonly("membership", &community::LouvainResult::membership)
      .def_readonly("q", &community::LouvainResult::q)
      .def_readonly("q_levels", &community::LouvainResult::q_levels);
  m.def("louvain_detailed", &community::louvain_detailed, py::arg("w"), py::arg("seed"));

  py::class_<community::MultilayerEnsemble>(m, "MultilayerEnsemble")
      .def(py::init<>())
      .def_readwrite("layers", &community::MultilayerEnsemble::layers)
      .def_readwrite("gamma", &community::MultilayerEnsemble::gamma)
      .def_readwrite("coupling", &community::MultilayerEnsemble::coupling);
  py::class_<community::MultilayerResult>(m, "MultilayerResult")
      .def_readonly("consensus", &community::MultilayerResult::consensus)
      .def_readonly("per_layer", &community::MultilayerResult::per_layer)
      .def_readonly("is_consensus", &community::MultilayerResult::is_consensus)
      .def_readonly("q", &community::MultilayerResult::q)
      .def_readonly("q_levels", &community::MultilayerResult::q_levels);
  m.def("multilayer_modularity", &community::multilayer_modularity, py::arg("ensemble"),
        py::arg("parts"));
  m.def("multilayer_louvain", &community::multilayer_louvain, py::arg("ensemble"),
        py::arg("seed"));
  m.def("spectral_clustering", &community::spectral_clustering, py::arg("w"), py::arg("k"),
        py::arg("seed"));

  py::class_<community::AssociationConsensus>(m, "AssociationConsensus")
      .def_readonly("counts", &community::AssociationConsensus::counts)
      .def_readonly("pairs", &community::AssociationConsensus::pairs);
  m.def("association_consensus", &community::association_consensus, py::arg("parts"),
        py::arg("top_fraction"));

  // Block connectivity.
  py::class_<blockmodel::BlockCounts>(m, "BlockCounts")
      .def_readonly("edges", &blockmodel::BlockCounts::edges)
      .def_readonly("pairs", &blockmodel::BlockCounts::pairs)
      .def_readonly("block_sizes", &blockmodel::BlockCounts::block_sizes);
  m.def("block_counts", &blockmodel::block_counts, py::arg("w"), py::arg("g"));

  py::class_<blockmodel::BlockConnectivity>(m, "BlockConnectivity")
      .def_readonly("theta", &blockmodel::BlockConnectivity::theta)
      .def_readonly("subject", &blockmodel::BlockConnectivity::subject)
      .def_readonly("time", &blockmodel::BlockConnectivity::time)
      .def("k", &blockmodel::BlockConnectivity::k);
  m.def("estimate_theta", &blockmodel::estimate_theta, py::arg("counts"));
  m.def("log_likelihood", &blockmodel::log_likelihood, py::arg("tensor"), py::arg("g"),
        py::arg("thetas"));
  m.def("clamp_epsilon", &blockmodel::clamp_epsilon, py::arg("counts"));
  m.def("to_beta", &blockmodel::to_beta, py::arg("theta"), py::arg("eps") = 1e-6);
  m.def("from_beta", &blockmodel::from_beta, py::arg("beta"), py::arg("k"));
  m.def("triangular_k", &blockmodel::triangular_k, py::arg("d"));

  // Recurring states.
  py::class_<dynstate::StateSequence>(m, "StateSequence")
      .def(py::init<>())
      .def_readwrite("labels", &dynstate::StateSequence::labels)
      .def("flatten", &dynstate::StateSequence::flatten);

  py::class_<dynstate::KMeansStates>(m, "KMeansStates")
      .def_readonly("states", &dynstate::KMeansStates::states)
      .def_readonly("centroids", &dynstate::KMeansStates::centroids)
      .def_readonly("inertia", &dynstate::KMeansStates::inertia);
  m.def("kmeans_states", &dynstate::kmeans_states, py::arg("betas"), py::arg("s"),
        py::arg("seed"));

  py::class_<dynstate::HmmModel>(m, "HmmModel")
      .def_readonly("num_states", &dynstate::HmmModel::num_states)
      .def_readonly("initial", &dynstate::HmmModel::initial)
      .def_readonly("transition", &dynstate::HmmModel::transition)
      .def_readonly("means", &dynstate::HmmModel::means)
      .def_readonly("variances", &dynstate::HmmModel::variances)
      .def_readonly("converged", &dynstate::HmmModel::converged)
      .def_readonly("log_likelihood", &dynstate::HmmModel::log_likelihood)
      .def_readonly("iterations", &dynstate::HmmModel::iterations)
      .def_readonly("ll_history", &dynstate::HmmModel::ll_history)
      .def("dim", &dynstate::HmmModel::dim);
  m.def("hmm_fit", &dynstate::hmm_fit, py::arg("betas"), py::arg("s"), py::arg("seed"));
  m.def("viterbi", &dynstate::viterbi, py::arg("betas"), py::arg("model"));
  m.def("state_theta", &dynstate::state_theta, py::arg("model"));

  py::class_<dynstate::StateCountScan::Row>(m, "StateCountRow")
      .def_readonly("s", &dynstate::StateCountScan::Row::s)
      .def_readonly("silhouette", &dynstate::StateCountScan::Row::silhouette)
      .def_readonly("davies_bouldin", &dynstate::StateCountScan::Row::davies_bouldin)
      .def_readonly("inertia", &dynstate::StateCountScan::Row::inertia);
  py::class_<dynstate::StateCountScan>(m, "StateCountScan")
      .def_readonly("by_silhouette", &dynstate::StateCountScan::by_silhouette)
      .def_readonly("by_davies_bouldin", &dynstate::StateCountScan::by_davies_bouldin)
      .def_readonly("scores", &dynstate::StateCountScan::scores);
  m.def("select_num_states", &dynstate::select_num_states, py::arg("betas"), py::arg("s_max"),
        py::arg("seed"));

  // Synthetic families.
  m.def("make_theta", &synth::make_theta, py::arg("k"), py::arg("lambda_"), py::arg("alpha"));
  m.def("balanced_membership", &synth::balanced_membership, py::arg("n"), py::arg("k"));
  m.def(
      "sample_network",
      [](const Matrix& theta, const Membership& g, std::uint64_t seed) {
        return synth::sample_network(theta, g, seed);
      },
      py::arg("theta"), py::arg("g"), py::arg("seed"));

  py::class_<synth::PlantedStatic>(m, "PlantedStatic")
      .def_readonly("ensemble", &synth::PlantedStatic::ensemble)
      .def_readonly("g_true", &synth::PlantedStatic::g_true)
      .def_readonly("theta_true", &synth::PlantedStatic::theta_true);
  m.def("planted_static", &synth::planted_static, py::arg("n"), py::arg("k"), py::arg("r"),
        py::arg("alpha"), py::arg("lambda_"), py::arg("eps_range"), py::arg("seed"));

  py::class_<synth::ScheduleBlock>(m, "ScheduleBlock")
      .def(py::init<>())
      .def_readwrite("state", &synth::ScheduleBlock::state)
      .def_readwrite("length", &synth::ScheduleBlock::length);
  m.def("interleaved_schedule", &synth::interleaved_schedule, py::arg("t"), py::arg("s"),
        py::arg("repeats") = 2);

  py::class_<synth::PlantedDynamic>(m, "PlantedDynamic")
      .def_readonly("tensors", &synth::PlantedDynamic::tensors)
      .def_readonly("s_true", &synth::PlantedDynamic::s_true)
      .def_readonly("theta_states", &synth::PlantedDynamic::theta_states)
      .def_readonly("schedule", &synth::PlantedDynamic::schedule)
      .def_readonly("g_true", &synth::PlantedDynamic::g_true)
      .def_readonly("betas_true", &synth::PlantedDynamic::betas_true);
  m.def("planted_dynamic", &synth::planted_dynamic, py::arg("n"), py::arg("k"), py::arg("r"),
        py::arg("t"), py::arg("s"), py::arg("lambdas"), py::arg("alpha"), py::arg("sigma"),
        py::arg("schedule"), py::arg("seed"));

  // Agreement and quality metrics.
  m.def("adjusted_rand_index", &metrics::adjusted_rand_index, py::arg("a"), py::arg("b"));
  m.def("rand_index", &metrics::rand_index, py::arg("a"), py::arg("b"));
  py::class_<metrics::PairF1>(m, "PairF1")
      .def_readonly("f1", &metrics::PairF1::f1)
      .def_readonly("precision", &metrics::PairF1::precision)
      .def_readonly("recall", &metrics::PairF1::recall);
  m.def("f1_pairwise", &metrics::f1_pairwise, py::arg("a"), py::arg("b"));
  m.def("theta_mse", &metrics::theta_mse, py::arg("estimate"), py::arg("truth"));
  m.def("silhouette", &metrics::silhouette, py::arg("data"), py::arg("labels"));
  m.def("davies_bouldin", &metrics::davies_bouldin, py::arg("data"), py::arg("labels"));
}
