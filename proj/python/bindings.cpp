#include <pybind11/pybind11.h>

#include "gridstab/error.hpp"
#include "gridstab/ops.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
    m.doc() = "gridstab native core";

    static py::exception<gridstab::Error> domain_error(m, "DomainError", PyExc_RuntimeError);
    static py::exception<gridstab::InputError> input_error(m, "InputError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const gridstab::Error& e) {
            auto& target = e.is_input_error() ? static_cast<py::object&>(input_error) : domain_error;
            py::object exc = target(e.what());
            exc.attr("code") = e.code();
            PyErr_SetObject(target.ptr(), exc.ptr());
        }
    });

    m.def(
        "execute",
        [](const std::string& op, const std::string& request, const std::string& base_dir) {
            nlohmann::json req;
            try {
                req = nlohmann::json::parse(request);
            } catch (const nlohmann::json::parse_error& e) {
                throw gridstab::ParseError(e.what());
            }
            gridstab::OpContext ctx;
            ctx.base_dir = base_dir;
            nlohmann::json out;
            {
                py::gil_scoped_release release;
                out = gridstab::execute(op, req, ctx);
            }
            return gridstab::render_json(out);
        },
        py::arg("op"), py::arg("request"), py::arg("base_dir") = ".",
        "Run one operation on a JSON request string; returns the JSON response string.");
}
