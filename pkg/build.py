# Импортируем необходимые стандартные библиотеки Python
import shutil  # Для операций с файлами и директориями
import subprocess  # Для запуска внешних процессов
import sys  # Для доступа к системным параметрам и функциям
from pathlib import Path  # Для удобной работы с путями файловой системы

# Имя исполняемого файла командной строки
APP_NAME = "brainseg"


def build():
    """Сборка консольного исполняемого файла с помощью PyInstaller"""
    print(f"Building {APP_NAME} for {sys.platform}...")

    # Устанавливаем зависимости проекта из файла requirements.txt
    subprocess.run([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"], check=True)

    bin_dir = Path("bin")
    bin_dir.mkdir(exist_ok=True)

    # --onefile: один исполняемый файл
    # --console: приложение командной строки, вывод в терминал
    # --paths: пакеты приложения лежат в src/
    # --collect-submodules: подмодули torch и scipy подгружаются динамически
    subprocess.run([
        "pyinstaller",
        "--onefile",
        "--console",
        f"--name={APP_NAME}",
        "--clean",
        "--noupx",
        "--paths=src",
        "--collect-submodules=scipy.ndimage",
        "src/main.py"
    ], check=True)

    executable = f"{APP_NAME}.exe" if sys.platform.startswith("win") else APP_NAME
    try:
        shutil.move(str(Path("dist") / executable), str(bin_dir / executable))
        print(f"Build completed! Executable location: bin/{executable}")
    except OSError:
        print(f"Build completed! Executable location: dist/{executable}")


def main():
    """Основная функция сборки"""
    if not (sys.platform.startswith("win") or sys.platform.startswith("linux") or sys.platform == "darwin"):
        print("Unsupported platform")
        return
    build()


if __name__ == "__main__":
    main()
