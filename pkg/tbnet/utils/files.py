from pathlib import Path

from ..errors import OutputExistsError


def check_output_path(path, force: bool = False) -> Path:
    """Refuses to clobber an existing file unless forced. Touches nothing."""
    path = Path(path)
    if path.is_dir():
        raise OutputExistsError(f"{path} is a directory")
    if path.exists() and not force:
        raise OutputExistsError(f"{path} already exists (use --force to overwrite)")
    return path


def ensure_output_path(path, force: bool = False) -> Path:
    """check_output_path, then creates the parent directory."""
    path = check_output_path(path, force)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def check_output_dir(path, force: bool = False) -> Path:
    """An output directory must be new or empty unless forced. Touches nothing."""
    path = Path(path)
    if path.exists():
        if not path.is_dir():
            raise OutputExistsError(f"{path} exists and is not a directory")
        if any(path.iterdir()) and not force:
            raise OutputExistsError(f"{path} is not empty (use --force to overwrite)")
    return path


def ensure_output_dir(path, force: bool = False) -> Path:
    path = check_output_dir(path, force)
    path.mkdir(parents=True, exist_ok=True)
    return path
