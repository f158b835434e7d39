"""This module generates the readme and API reference pages for mkdocs.

As part of the mkdocs-gen-files plugin, it injects the README and writes one
reference page per ctcb module from its docstrings. Modules are parsed with
``ast`` rather than imported, so the docs build needs none of the runtime
dependencies.
"""

import ast
from pathlib import Path

import mkdocs_gen_files

docs_parent_dir = Path(__file__).parent.parent
source_dir = docs_parent_dir / "source"

# Automagically injects README file into the documentation
readme_path = docs_parent_dir / "README.md"
if readme_path.exists():
    with open(readme_path, "r") as r, mkdocs_gen_files.open("readme.md", "w") as f:
        f.write(r.read())


def _signature(node: ast.FunctionDef) -> str:
    return f"{node.name}({ast.unparse(node.args)})"


def _entries(tree: ast.Module) -> list[str]:
    """Markdown for the public classes and functions of a module."""
    lines = []
    for node in tree.body:
        if isinstance(node, ast.ClassDef) and not node.name.startswith("_"):
            lines.append(f"## class `{node.name}`\n")
            lines.append(f"{ast.get_docstring(node) or ''}\n")
            for item in node.body:
                if isinstance(item, ast.FunctionDef) and not item.name.startswith("_"):
                    doc = (ast.get_docstring(item) or "").split("\n\n")[0]
                    lines.append(f"- `{_signature(item)}`: {doc}")
            lines.append("")
        elif isinstance(node, ast.FunctionDef) and not node.name.startswith("_"):
            lines.append(f"## `{_signature(node)}`\n")
            lines.append(f"{ast.get_docstring(node) or ''}\n")
    return lines


for module_path in sorted((source_dir / "ctcb").glob("**/*.py")):
    if module_path.name == "__init__.py":
        continue
    relative = module_path.relative_to(source_dir).with_suffix("")
    module_name = ".".join(relative.parts)
    tree = ast.parse(module_path.read_text())
    with mkdocs_gen_files.open(f"reference/{module_name}.md", "w") as gf:
        gf.write(f"# `{module_name}`\n\n{ast.get_docstring(tree) or ''}\n\n")
        gf.write("\n".join(_entries(tree)))
