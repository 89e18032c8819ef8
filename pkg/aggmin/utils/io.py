from pathlib import Path
import pandas as pd


def write_commented_csv(df: pd.DataFrame, path: str | Path, comments: list[str]) -> None:
    """Write `# comment` lines followed by an RFC-4180 CSV body (UTF-8, '.' decimal)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for line in comments:
            f.write(f'# {line}\n')
        df.to_csv(f, index=False, lineterminator='\n')


def read_commented_csv(path: str | Path) -> tuple[list[str], pd.DataFrame]:
    path = Path(path)
    comments = []
    with open(path, encoding='utf-8') as f:
        for line in f:
            if not line.startswith('#'):
                break
            comments.append(line[1:].strip())
    return comments, pd.read_csv(path, comment='#')


def write_key_values(values: dict, path: str | Path, comments: list[str]) -> None:
    """Flat `key = value` text block, one entry per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for line in comments:
            f.write(f'# {line}\n')
        f.write(format_key_values(values))


def format_key_values(values: dict) -> str:
    return ''.join(f'{key} = {value}\n' for key, value in values.items())
