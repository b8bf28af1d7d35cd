// Copyright 2026 The UR2M Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Uncertainty expressed with a handful of primitive operators, as an
// interpreter-friendly graph: relu -> add 1 -> squeeze -> sum -> 2 / S.

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ur2m/errors.hpp"

namespace ur2m::opgraph {

enum class Op { kInput, kConst, kRelu, kAddConst, kSqueeze, kReduceSum, kDivide };

inline std::string to_string(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kConst: return "const";
    case Op::kRelu: return "relu";
    case Op::kAddConst: return "add_const";
    case Op::kSqueeze: return "squeeze";
    case Op::kReduceSum: return "reduce_sum";
    case Op::kDivide: return "divide";
  }
  return "?";
}

// Values are flat vectors; shapes are carried only as lengths plus a
// leading unit axis that squeeze removes.
struct Value {
  std::vector<double> data;
  std::vector<std::size_t> shape;
};

struct Node {
  Op op = Op::kInput;
  std::vector<std::size_t> inputs;
  double constant = 0.0;  // kConst value, kAddConst addend
  std::string name;
};

struct Graph {
  std::vector<Node> nodes;
  std::size_t output = 0;

  std::size_t add(Node n) {
    nodes.push_back(std::move(n));
    return nodes.size() - 1;
  }

  // Nodes are stored in evaluation order; an input that does not precede
  // its consumer means the graph has a cycle (or a forward reference).
  void validate() const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t in : nodes[i].inputs) {
        if (in >= i) {
          throw InvariantError("opgraph: node " + std::to_string(i) + " (" + nodes[i].name +
                               ") consumes node " + std::to_string(in) +
                               " which does not precede it: cyclic graph");
        }
      }
    }
    if (output >= nodes.size()) throw InvariantError("opgraph: output node out of range");
  }

  std::map<std::string, std::size_t> op_counts() const {
    std::map<std::string, std::size_t> m;
    for (const auto& n : nodes) ++m[to_string(n.op)];
    return m;
  }
};

// Graph of u = 2 / (relu(z_event) + 1 + relu(z_no_event) + 1) for a (1, 2)
// logit tensor.
inline Graph build_uncertainty_graph(std::size_t classes = 2) {
  Graph g;
  const auto x = g.add({Op::kInput, {}, 0.0, "logits"});
  const auto r = g.add({Op::kRelu, {x}, 0.0, "evidence"});
  const auto a = g.add({Op::kAddConst, {r}, 1.0, "alpha"});
  const auto sq = g.add({Op::kSqueeze, {a}, 0.0, "alpha_flat"});
  const auto s = g.add({Op::kReduceSum, {sq}, 0.0, "strength"});
  const auto k = g.add({Op::kConst, {}, static_cast<double>(classes), "classes"});
  g.output = g.add({Op::kDivide, {k, s}, 0.0, "uncertainty"});
  return g;
}

inline Value evaluate(const Graph& g, const Value& input) {
  g.validate();
  std::vector<Value> vals(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    Value& out = vals[i];
    switch (n.op) {
      case Op::kInput:
        out = input;
        break;
      case Op::kConst:
        out = {{n.constant}, {}};
        break;
      case Op::kRelu:
        out = vals[n.inputs.at(0)];
        for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
        break;
      case Op::kAddConst:
        out = vals[n.inputs.at(0)];
        for (auto& v : out.data) v += n.constant;
        break;
      case Op::kSqueeze: {
        out = vals[n.inputs.at(0)];
        std::vector<std::size_t> shape;
        for (std::size_t d : out.shape) {
          if (d != 1) shape.push_back(d);
        }
        out.shape = std::move(shape);
        break;
      }
      case Op::kReduceSum: {
        double s = 0.0;
        for (double v : vals[n.inputs.at(0)].data) s += v;
        out = {{s}, {}};
        break;
      }
      case Op::kDivide: {
        const Value& a = vals[n.inputs.at(0)];
        const Value& b = vals[n.inputs.at(1)];
        if (a.data.size() != 1 || b.data.size() != 1) throw DimensionError("opgraph: divide expects scalars");
        if (b.data[0] == 0.0) throw DomainError("opgraph: division by zero");
        out = {{a.data[0] / b.data[0]}, {}};
        break;
      }
    }
  }
  return vals[g.output];
}

inline double eval_uncertainty(const Graph& g, double z_event, double z_no_event) {
  return evaluate(g, {{z_event, z_no_event}, {1, 2}}).data.at(0);
}

}  // namespace ur2m::opgraph
